import json
import os

import numpy as np
import pytest

from sleepstack.core.epochs import Epoch, LabelScheme, Subset
from sleepstack.core.errors import CorruptEpochStore, UsageError
from sleepstack.core.store import EpochStore, sidecar_path, write_epoch_store


def test_store_preserves_epochs(store_path, epochs):
    store = EpochStore.open(store_path)

    assert len(store) == len(epochs)
    assert store.num_classes == 6
    assert store.scheme == LabelScheme.six_stage()
    assert store.channel == "EEG Fpz-Cz"
    assert store.recording_ids() == sorted({e.recording_id for e in epochs})
    for i in (0, 17, len(epochs) - 1):
        loaded = store.epoch(i)
        assert loaded.label == epochs[i].label
        assert loaded.recording_id == epochs[i].recording_id
        assert loaded.subset is epochs[i].subset
        assert loaded.position_index == epochs[i].position_index
        np.testing.assert_allclose(loaded.samples, epochs[i].samples, rtol=1e-6, atol=1e-4)


def test_store_filters_by_recording(store_path):
    store = EpochStore.open(store_path)
    selected = store.epochs(["ST7011"])
    assert len(selected) == 11
    assert all(e.subset is Subset.ST for e in selected)


def test_store_rejects_wrong_length_epochs(tmp_path):
    short = Epoch(
        samples=np.zeros(10),
        label=0,
        recording_id="SC4001",
        subject_id="SC00",
        subset=Subset.SC,
        position_index=0,
    )
    with pytest.raises(UsageError):
        write_epoch_store(str(tmp_path / "bad.bin"), [short], LabelScheme.six_stage(), "EEG Fpz-Cz")


def test_missing_store(tmp_path):
    with pytest.raises(UsageError):
        EpochStore.open(str(tmp_path / "nothing.bin"))


def test_missing_sidecar(store_path):
    os.remove(sidecar_path(store_path))
    with pytest.raises(CorruptEpochStore):
        EpochStore.open(store_path)


def test_truncated_store(store_path):
    with open(store_path, "rb") as f:
        data = f.read()
    with open(store_path, "wb") as f:
        f.write(data[:-100])
    with pytest.raises(CorruptEpochStore, match="truncated"):
        EpochStore.open(store_path)


def test_bad_magic(store_path):
    with open(store_path, "r+b") as f:
        f.write(b"NOTSTORE")
    with pytest.raises(CorruptEpochStore):
        EpochStore.open(store_path)


@pytest.mark.parametrize("key", ["records", "num_classes", "class_names", "channel"])
def test_sidecar_missing_field(store_path, key):
    with open(sidecar_path(store_path), "r", encoding="utf-8") as f:
        index = json.load(f)
    del index[key]
    with open(sidecar_path(store_path), "w", encoding="utf-8") as f:
        json.dump(index, f)
    with pytest.raises(CorruptEpochStore, match=key):
        EpochStore.open(store_path)


def test_sidecar_record_without_offset(store_path):
    with open(sidecar_path(store_path), "r", encoding="utf-8") as f:
        index = json.load(f)
    del index["records"][-1]["offset"]
    with open(sidecar_path(store_path), "w", encoding="utf-8") as f:
        json.dump(index, f)
    with pytest.raises(CorruptEpochStore):
        EpochStore.open(store_path)
