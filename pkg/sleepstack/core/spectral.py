"""
Spectral shape features of an epoch or band signal
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import signal

from .epochs import SAMPLING_RATE_HZ
from .errors import ZeroSignal

logger = logging.getLogger(__name__)


def power_spectrum(
    x: np.ndarray, fs: float = SAMPLING_RATE_HZ, window: Optional[str] = "hann"
) -> Tuple[np.ndarray, np.ndarray]:
    """(bin frequencies, |DFT|^2) of the windowed signal"""
    x = np.asarray(x, dtype=np.float64)
    if window and window != "none":
        x = x * signal.get_window(window, x.size)
    power = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.size, d=1.0 / fs)
    return freqs, power


def _total(power: np.ndarray) -> float:
    total = float(np.sum(power))
    if not total > 0:
        raise ZeroSignal("Signal has no spectral energy")
    return total


def rolloff_from_spectrum(freqs: np.ndarray, power: np.ndarray, fraction: float = 0.85) -> float:
    """Lowest bin frequency whose cumulative energy reaches fraction of the total"""
    _total(power)
    cumulative = np.cumsum(power)
    index = int(np.searchsorted(cumulative, fraction * cumulative[-1], side="left"))
    return float(freqs[min(index, len(freqs) - 1)])


def spread_from_spectrum(freqs: np.ndarray, power: np.ndarray) -> float:
    total = _total(power)
    centroid = np.sum(power * freqs) / total
    return float(np.sqrt(np.sum(power * (freqs - centroid) ** 2) / total))


def spectral_rolloff(
    x: np.ndarray,
    fraction: float = 0.85,
    fs: float = SAMPLING_RATE_HZ,
    window: Optional[str] = "hann",
) -> float:
    freqs, power = power_spectrum(x, fs, window)
    return rolloff_from_spectrum(freqs, power, fraction)


def spectral_spread(x: np.ndarray, fs: float = SAMPLING_RATE_HZ, window: Optional[str] = "hann") -> float:
    freqs, power = power_spectrum(x, fs, window)
    return spread_from_spectrum(freqs, power)
