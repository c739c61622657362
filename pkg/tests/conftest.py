import os

import numpy as np
import pytest

from sleepstack.core.epochs import LabelScheme, SplitManifest, Task, ingest_directory
from sleepstack.core.hypnogram import Stage
from sleepstack.core.store import write_epoch_store

from edf_factory import write_recording

NIGHT = [
    Stage.W, Stage.W, Stage.S1, Stage.S2, Stage.S2, Stage.S3,
    Stage.S4, Stage.S4, Stage.REM, Stage.MVT, Stage.S1, Stage.W,
]

RECORDINGS = {
    "SC4001E0": 600.0,
    "SC4002E0": 650.0,
    "SC4011E0": 700.0,
    "SC4021E0": 750.0,
    "ST7011J0": 300.0,
    "ST7021J0": 350.0,
}


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep SLEEPSTACK_* variables from the calling shell out of tests"""
    for name in list(os.environ):
        if name.startswith("SLEEPSTACK_"):
            monkeypatch.delenv(name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def recording_dir(tmp_path):
    """Six synthetic nights: four SC over three subjects, two ST"""
    directory = tmp_path / "data"
    directory.mkdir()
    gen = np.random.default_rng(7)
    for i, (name, amplitude) in enumerate(RECORDINGS.items()):
        write_recording(
            str(directory),
            name,
            NIGHT,
            gen,
            hypnogram_format="tsv" if i % 2 else "edf",
            amplitude=amplitude,
            trailing_unscored_s=1800.0,
        )
    return str(directory)


@pytest.fixture
def manifest_path(tmp_path):
    manifest = SplitManifest(
        task=Task.RS_TASK,
        train_recordings=("SC4001", "SC4002", "SC4011", "ST7011"),
        test_recordings=("SC4021", "ST7021"),
    )
    path = tmp_path / "manifest.json"
    manifest.save(str(path))
    return str(path)


@pytest.fixture
def epochs(recording_dir):
    return ingest_directory(
        recording_dir,
        [name[:6] for name in RECORDINGS],
        LabelScheme.six_stage(),
        threads=2,
    )


@pytest.fixture
def store_path(tmp_path, epochs):
    path = tmp_path / "epochs.bin"
    write_epoch_store(str(path), epochs, LabelScheme.six_stage(), "EEG Fpz-Cz")
    return str(path)
