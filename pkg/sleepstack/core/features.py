"""
Time-domain band features (MMD, EnergySis) and the per-band feature tables
used by the baseline and the subset analysis
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .epochs import EPOCH_SAMPLES, Epoch
from .errors import UsageError
from .filters import BiquadChain, filter_signal
from .spectral import spectral_rolloff, spectral_spread

logger = logging.getLogger(__name__)

TIME_FEATURES = ("mmd", "energy_sis")
ANALYSIS_FEATURES = ("mmd", "energy_sis", "spectral_rolloff", "spectral_spread")


def mmd(x: np.ndarray, window: int = 100) -> float:
    """
    Sum over windows of the distance between each window's max and min points

    Per window d = sqrt((i_max - i_min)^2 + (x_max - x_min)^2), with first-occurrence
    indices counted in samples.
    """
    x = np.asarray(x, dtype=np.float64)
    if window < 1 or x.size % window:
        raise UsageError(f"MMD window {window} does not divide the signal length {x.size}")
    windows = x.reshape(-1, window)
    i_max = np.argmax(windows, axis=1)
    i_min = np.argmin(windows, axis=1)
    spread = windows.max(axis=1) - windows.min(axis=1)
    return float(np.sum(np.sqrt((i_max - i_min).astype(np.float64) ** 2 + spread ** 2)))


def energy_sis(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.dot(x, x))


def feature_names(bands: Sequence[str]) -> List[str]:
    """Column names in FeatureVector order: (mmd, energy_sis) per band"""
    return [f"{feature}:{band}" for band in bands for feature in TIME_FEATURES]


@dataclass
class FeatureVector:
    values: np.ndarray
    label: int
    recording_id: str
    epoch_idx: int


def extract_features(epoch: Epoch, bank: Mapping[str, BiquadChain], window: int = 100) -> FeatureVector:
    """Filter the epoch into each band and take (MMD, EnergySis) per band"""
    samples = np.asarray(epoch.samples, dtype=np.float64)
    if samples.size != EPOCH_SAMPLES:
        raise UsageError(f"Epoch has {samples.size} samples, expected {EPOCH_SAMPLES}")
    values = []
    for chain in bank.values():
        banded = filter_signal(samples, chain)
        values.extend([mmd(banded, window), energy_sis(banded)])
    return FeatureVector(
        values=np.array(values),
        label=epoch.label,
        recording_id=epoch.recording_id,
        epoch_idx=epoch.position_index,
    )


def extract_feature_matrix(
    epochs: Sequence[Epoch], bank: Mapping[str, BiquadChain], window: int = 100, threads: int = 1
) -> List[FeatureVector]:
    """Features for every epoch, in input order"""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        vectors = list(pool.map(lambda e: extract_features(e, bank, window), epochs))
    logger.info(f"Extracted {len(vectors)} feature vectors over {len(bank)} bands")
    return vectors


def write_feature_csv(path: str, vectors: Sequence[FeatureVector]) -> None:
    width = len(vectors[0].values) if vectors else 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["recording_id", "epoch_idx", "label"] + [f"f{i}" for i in range(width)])
        for v in vectors:
            writer.writerow([v.recording_id, v.epoch_idx, v.label] + [repr(float(x)) for x in v.values])


def band_analysis_features(
    samples: np.ndarray,
    bank: Mapping[str, BiquadChain],
    window: int = 100,
    rolloff_fraction: float = 0.85,
    spectral_window: Optional[str] = "hann",
) -> Dict[str, float]:
    """All four analysis features per band, keyed 'feature:band'"""
    out = {}
    for band, chain in bank.items():
        banded = filter_signal(samples, chain)
        out[f"mmd:{band}"] = mmd(banded, window)
        out[f"energy_sis:{band}"] = energy_sis(banded)
        out[f"spectral_rolloff:{band}"] = spectral_rolloff(banded, rolloff_fraction, window=spectral_window)
        out[f"spectral_spread:{band}"] = spectral_spread(banded, window=spectral_window)
    return out
