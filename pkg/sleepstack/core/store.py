"""
Binary epoch store with a JSON sidecar index

Layout: 8-byte magic, u32 version, u32 epoch count, then per epoch
(u16 + recording id, u16 + subject id, u8 subset, u8 label, u32 position,
3000 little-endian float32 samples). The sidecar `<store>.json` records each
epoch's sample offset so any epoch can be read without scanning the file.
"""

import json
import logging
import os
import struct
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .epochs import EPOCH_SAMPLES, Epoch, LabelScheme, Subset
from .errors import CorruptEpochStore, UsageError

logger = logging.getLogger(__name__)

MAGIC = b"SLPEPOCH"
VERSION = 1
_SUBSET_CODES = {Subset.SC: 0, Subset.ST: 1}
_SUBSETS = {code: subset for subset, code in _SUBSET_CODES.items()}


def _pack_text(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def write_epoch_store(
    path: str, epochs: Sequence[Epoch], scheme: LabelScheme, channel: str
) -> None:
    """Write epochs and their sidecar index"""
    records = []
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<II", VERSION, len(epochs)))
        for epoch in epochs:
            samples = np.asarray(epoch.samples, dtype="<f4")
            if samples.shape != (EPOCH_SAMPLES,):
                raise UsageError(
                    f"{epoch.recording_id}: epoch has {samples.size} samples, expected {EPOCH_SAMPLES}"
                )
            f.write(_pack_text(epoch.recording_id))
            f.write(_pack_text(epoch.subject_id))
            f.write(
                struct.pack(
                    "<BBI", _SUBSET_CODES[epoch.subset], epoch.label, epoch.position_index
                )
            )
            records.append(
                {
                    "offset": f.tell(),
                    "recording_id": epoch.recording_id,
                    "subject_id": epoch.subject_id,
                    "subset": epoch.subset.value,
                    "label": epoch.label,
                    "position_index": epoch.position_index,
                }
            )
            f.write(samples.tobytes())

    index = {
        "version": VERSION,
        "num_classes": scheme.num_classes,
        "class_names": list(scheme.class_names),
        "channel": channel,
        "num_epochs": len(epochs),
        "records": records,
    }
    with open(sidecar_path(path), "w", encoding="utf-8") as f:
        json.dump(index, f, indent=1)
        f.write("\n")
    logger.info(f"Wrote {len(epochs)} epochs to {path}")


def sidecar_path(path: str) -> str:
    return path + ".json"


@dataclass
class EpochStore:
    """Read access to a written epoch store"""

    path: str
    num_classes: int
    class_names: List[str]
    channel: str
    records: List[dict]
    _data: np.ndarray

    @classmethod
    def open(cls, path: str) -> "EpochStore":
        if not os.path.isfile(path):
            raise UsageError(f"Epoch store not found: {path}")
        if not os.path.isfile(sidecar_path(path)):
            raise CorruptEpochStore(f"Missing sidecar index {sidecar_path(path)}")
        try:
            with open(sidecar_path(path), "r", encoding="utf-8") as f:
                index = json.load(f)
        except json.JSONDecodeError as e:
            raise CorruptEpochStore(f"Unreadable sidecar index: {e}")

        data = np.memmap(path, dtype=np.uint8, mode="r")
        if data.size < 16 or bytes(data[:8]) != MAGIC:
            raise CorruptEpochStore(f"{path} is not an epoch store")
        version, count = struct.unpack("<II", bytes(data[8:16]))
        if version != VERSION or count != index.get("num_epochs"):
            raise CorruptEpochStore(f"{path}: header does not match its index")
        try:
            records = index["records"]
            fields = dict(
                num_classes=index["num_classes"],
                class_names=index["class_names"],
                channel=index["channel"],
            )
            end = records[-1]["offset"] + EPOCH_SAMPLES * 4 if records else 0
        except (KeyError, TypeError, IndexError) as e:
            raise CorruptEpochStore(f"{sidecar_path(path)} is missing index field {e}")
        if end > data.size:
            raise CorruptEpochStore(f"{path} is truncated")
        return cls(path=path, records=records, _data=data, **fields)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def scheme(self) -> LabelScheme:
        return LabelScheme.for_classes(self.num_classes)

    def samples(self, i: int) -> np.ndarray:
        offset = self.records[i]["offset"]
        return self._data[offset:offset + EPOCH_SAMPLES * 4].view("<f4")

    def epoch(self, i: int) -> Epoch:
        r = self.records[i]
        return Epoch(
            samples=self.samples(i),
            label=r["label"],
            recording_id=r["recording_id"],
            subject_id=r["subject_id"],
            subset=Subset(r["subset"]),
            position_index=r["position_index"],
        )

    def epochs(self, recording_ids: Optional[Iterable[str]] = None) -> List[Epoch]:
        """All epochs, or only those of the given recordings, in store order"""
        wanted = None if recording_ids is None else set(recording_ids)
        return [
            self.epoch(i)
            for i, r in enumerate(self.records)
            if wanted is None or r["recording_id"] in wanted
        ]

    def recording_ids(self) -> List[str]:
        return sorted({r["recording_id"] for r in self.records})
