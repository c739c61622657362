"""
Labeled 30 s epochs, label schemes, recording discovery and train/test splits
"""

import enum
import glob
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .edf import parse_edf_header, read_signal
from .errors import (
    EpochOutOfBounds,
    MissingRecordings,
    SamplingRateMismatch,
    SleepStackError,
    SubjectLeakage,
    UnknownRecordingId,
    UsageError,
)
from .hypnogram import EPOCH_SECONDS, HypnogramAnnotation, Stage, parse_hypnogram
from .seeds import make_rng

logger = logging.getLogger(__name__)

SAMPLING_RATE_HZ = 100
EPOCH_SAMPLES = EPOCH_SECONDS * SAMPLING_RATE_HZ
DEFAULT_CHANNEL = "EEG Fpz-Cz"


class SchemeMode(enum.Enum):
    SIX_STAGE = 6
    FIVE_STAGE = 5


class Subset(enum.Enum):
    SC = "SC"
    ST = "ST"


class Task(enum.Enum):
    RS_TASK = "RS_TASK"
    SC_TASK = "SC_TASK"

    @classmethod
    def parse(cls, value: str) -> "Task":
        aliases = {"rs": cls.RS_TASK, "sc": cls.SC_TASK}
        try:
            return aliases.get(value.lower()) or cls(value.upper())
        except ValueError:
            raise UsageError(f"Unknown task '{value}', expected rs or sc")


@dataclass(frozen=True)
class LabelScheme:
    """Stage to class index table; None means the stage is dropped"""

    mode: SchemeMode
    mapping: Dict[Stage, Optional[int]]
    class_names: Tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @classmethod
    def six_stage(cls) -> "LabelScheme":
        return cls(
            mode=SchemeMode.SIX_STAGE,
            mapping={
                Stage.S1: 0,
                Stage.S2: 1,
                Stage.S3: 2,
                Stage.S4: 3,
                Stage.REM: 4,
                Stage.W: 5,
                Stage.MVT: None,
                Stage.UNSCORED: None,
            },
            class_names=("S1", "S2", "S3", "S4", "REM", "W"),
        )

    @classmethod
    def five_stage(cls) -> "LabelScheme":
        return cls(
            mode=SchemeMode.FIVE_STAGE,
            mapping={
                Stage.S1: 0,
                Stage.S2: 1,
                Stage.S3: 2,
                Stage.S4: 2,
                Stage.REM: 3,
                Stage.W: 4,
                Stage.MVT: None,
                Stage.UNSCORED: None,
            },
            class_names=("S1", "S2", "S3", "REM", "W"),
        )

    @classmethod
    def for_classes(cls, num_classes: int) -> "LabelScheme":
        if num_classes == 6:
            return cls.six_stage()
        if num_classes == 5:
            return cls.five_stage()
        raise UsageError(f"Scheme must be 5 or 6 classes, got {num_classes}")


def map_label(stage: Stage, scheme: LabelScheme) -> Optional[int]:
    """Class index for a stage, or None when the stage is dropped"""
    return scheme.mapping[stage]


@dataclass(frozen=True)
class RecordingMeta:
    recording_id: str
    subject_id: str
    subset: Subset


_RECORDING_NAME = re.compile(r"^(S[CT])([47])(\d{2})(\d)")


def parse_recording_name(name: str) -> RecordingMeta:
    """
    Identity of a Sleep-EDF recording from its file name or id

    SC4ssN... / ST7ssN...: ss is the subject number, N the night.
    """
    base = os.path.basename(name)
    match = _RECORDING_NAME.match(base)
    if not match:
        raise UsageError(f"Not a Sleep-EDF recording name: '{name}'")
    subset, _, subject, _ = match.groups()
    return RecordingMeta(
        recording_id=base[:6],
        subject_id=f"{subset}{subject}",
        subset=Subset(subset),
    )


@dataclass(frozen=True)
class Epoch:
    """One labeled 30 s segment"""

    samples: np.ndarray = field(repr=False)
    label: int
    recording_id: str
    subject_id: str
    subset: Subset
    position_index: int


def segment_epochs(
    signal: np.ndarray,
    hypnogram: Sequence[HypnogramAnnotation],
    scheme: LabelScheme,
    meta: RecordingMeta,
) -> List[Epoch]:
    """
    Cut a 100 Hz signal into labeled epochs following the hypnogram

    Intervals whose stage maps to DROP produce no epoch and are not
    bounds-checked.
    """
    signal = np.asarray(signal, dtype=np.float64)
    epochs = []
    for annotation in hypnogram:
        label = map_label(annotation.stage, scheme)
        if label is None:
            continue
        first = int(round(annotation.onset_s * SAMPLING_RATE_HZ))
        for k in range(annotation.num_epochs):
            start = first + k * EPOCH_SAMPLES
            stop = start + EPOCH_SAMPLES
            if stop > signal.shape[0]:
                raise EpochOutOfBounds(
                    f"{meta.recording_id}: {annotation.stage.value} interval at "
                    f"{start / SAMPLING_RATE_HZ:g}s ends past the signal ({signal.shape[0] / SAMPLING_RATE_HZ:g}s)"
                )
            samples = signal[start:stop].copy()
            samples.setflags(write=False)
            epochs.append(
                Epoch(
                    samples=samples,
                    label=label,
                    recording_id=meta.recording_id,
                    subject_id=meta.subject_id,
                    subset=meta.subset,
                    position_index=start // EPOCH_SAMPLES,
                )
            )
    return epochs


@dataclass(frozen=True)
class RecordingFiles:
    meta: RecordingMeta
    psg_path: str
    hypnogram_path: str


def discover_recordings(data_dir: str) -> Dict[str, RecordingFiles]:
    """Pair *-PSG.edf files with their hypnogram (EDF+ or .tsv) by recording id"""
    psg = {}
    for path in sorted(glob.glob(os.path.join(data_dir, "*-PSG.edf"))):
        psg[os.path.basename(path)[:6]] = path
    hypnograms = {}
    patterns = ("*-Hypnogram.edf", "*-Hypnogram.tsv")
    for pattern in patterns:
        for path in sorted(glob.glob(os.path.join(data_dir, pattern))):
            hypnograms.setdefault(os.path.basename(path)[:6], path)

    found = {}
    for recording_id, psg_path in psg.items():
        if recording_id not in hypnograms:
            logger.warning(f"No hypnogram for {psg_path}, skipping")
            continue
        found[recording_id] = RecordingFiles(
            meta=parse_recording_name(recording_id),
            psg_path=psg_path,
            hypnogram_path=hypnograms[recording_id],
        )
    return found


def load_recording(
    files: RecordingFiles, scheme: LabelScheme, channel: str = DEFAULT_CHANNEL
) -> List[Epoch]:
    """Parse one PSG + hypnogram pair into epochs"""
    with open(files.psg_path, "rb") as f:
        psg = f.read()
    with open(files.hypnogram_path, "rb") as f:
        hypnogram = parse_hypnogram(f.read())

    header = parse_edf_header(psg)
    rate = header.sampling_rate(channel)
    if not np.isclose(rate, SAMPLING_RATE_HZ):
        raise SamplingRateMismatch(
            f"{files.psg_path}: channel '{channel}' is sampled at {rate:g} Hz, expected {SAMPLING_RATE_HZ} Hz"
        )
    signal = read_signal(psg, header, channel)
    epochs = segment_epochs(signal, hypnogram, scheme, files.meta)
    logger.info(f"{files.meta.recording_id}: {len(epochs)} epochs")
    return epochs


def ingest_directory(
    data_dir: str,
    recording_ids: Iterable[str],
    scheme: LabelScheme,
    channel: str = DEFAULT_CHANNEL,
    threads: int = 1,
) -> List[Epoch]:
    """
    Load every requested recording from a directory

    Recordings are parsed in parallel; the result is ordered by recording id.
    """
    wanted = sorted(set(recording_ids))
    available = discover_recordings(data_dir)
    missing = [r for r in wanted if r not in available]
    if missing:
        raise MissingRecordings(
            f"{len(missing)} recording(s) missing from {data_dir}: {', '.join(missing)}"
        )

    def load(recording_id: str) -> List[Epoch]:
        try:
            return load_recording(available[recording_id], scheme, channel)
        except SleepStackError as e:
            raise type(e)(f"{available[recording_id].psg_path}: {e}") from e

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_recording = list(pool.map(load, wanted))
    return [epoch for epochs in per_recording for epoch in epochs]


@dataclass(frozen=True)
class SplitManifest:
    task: Task
    train_recordings: Tuple[str, ...]
    test_recordings: Tuple[str, ...]

    def __post_init__(self):
        train_subjects = {parse_recording_name(r).subject_id for r in self.train_recordings}
        test_subjects = {parse_recording_name(r).subject_id for r in self.test_recordings}
        shared = sorted(train_subjects & test_subjects)
        if shared:
            raise SubjectLeakage(f"Subjects on both sides of the split: {', '.join(shared)}")
        if self.task is Task.SC_TASK:
            foreign = [
                r
                for r in self.train_recordings + self.test_recordings
                if parse_recording_name(r).subset is not Subset.SC
            ]
            if foreign:
                raise UsageError(f"SC task manifest lists non-SC recordings: {', '.join(foreign)}")

    @property
    def recordings(self) -> Tuple[str, ...]:
        return self.train_recordings + self.test_recordings

    @classmethod
    def load(cls, path: str) -> "SplitManifest":
        if not os.path.isfile(path):
            raise UsageError(f"Manifest not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            return cls(
                task=Task.parse(data["task"]),
                train_recordings=tuple(data["train_recordings"]),
                test_recordings=tuple(data["test_recordings"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise UsageError(f"Invalid manifest {path}: {e}")

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(
                {
                    "task": self.task.value,
                    "train_recordings": list(self.train_recordings),
                    "test_recordings": list(self.test_recordings),
                },
                f,
                indent=2,
            )
            f.write("\n")


def build_split(
    epochs: Sequence[Epoch], manifest: SplitManifest
) -> Tuple[List[Epoch], List[Epoch]]:
    """Partition epochs into (train, test) by recording id"""
    present = {e.recording_id for e in epochs}
    unknown = [r for r in manifest.recordings if r not in present]
    if unknown:
        raise UnknownRecordingId(f"Manifest recordings without epochs: {', '.join(unknown)}")

    train_ids = set(manifest.train_recordings)
    test_ids = set(manifest.test_recordings)
    train = [e for e in epochs if e.recording_id in train_ids]
    test = [e for e in epochs if e.recording_id in test_ids]

    leaked = sorted({e.subject_id for e in train} & {e.subject_id for e in test})
    if leaked:
        raise SubjectLeakage(f"Subjects on both sides of the split: {', '.join(leaked)}")
    return train, test


def random_split_manifest(
    recording_ids: Iterable[str], task: Task, test_fraction: float, seed: int
) -> SplitManifest:
    """
    Seeded patient-independent split: whole subjects are assigned to one side

    For the RS task subsets are split separately so both sides hold SC and ST.
    """
    metas = [parse_recording_name(r) for r in sorted(set(recording_ids))]
    if task is Task.SC_TASK:
        metas = [m for m in metas if m.subset is Subset.SC]
    rng = make_rng(seed, f"split.{task.value}")

    train, test = [], []
    for subset in Subset:
        subjects = sorted({m.subject_id for m in metas if m.subset is subset})
        if not subjects:
            continue
        order = rng.permutation(len(subjects))
        n_test = int(round(test_fraction * len(subjects)))
        test_subjects = {subjects[i] for i in order[:n_test]}
        for m in metas:
            if m.subset is subset:
                (test if m.subject_id in test_subjects else train).append(m.recording_id)
    return SplitManifest(task=task, train_recordings=tuple(train), test_recordings=tuple(test))


def class_count_summary(
    epochs: Sequence[Epoch],
    scheme: LabelScheme,
    manifest: Optional[SplitManifest] = None,
) -> List[Dict[str, object]]:
    """
    Per-subset class counts in the layout of the dataset accounting table

    Rows: SC, ST, Total, and Train/Test when a manifest is given.
    """

    def row(name: str, subset_epochs: Sequence[Epoch]) -> Dict[str, object]:
        counts = np.bincount(
            np.array([e.label for e in subset_epochs], dtype=np.int64),
            minlength=scheme.num_classes,
        )
        entry: Dict[str, object] = {
            "subset": name,
            "subjects": len({e.subject_id for e in subset_epochs}),
        }
        for class_name, count in zip(scheme.class_names, counts):
            entry[class_name] = int(count)
        entry["total"] = len(subset_epochs)
        return entry

    rows = [row(s.value, [e for e in epochs if e.subset is s]) for s in Subset]
    rows.append(row("Total", epochs))
    if manifest is not None:
        train, test = build_split(epochs, manifest)
        rows.append(row("Train", train))
        rows.append(row("Test", test))
    return rows
