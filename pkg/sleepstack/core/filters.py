"""
Butterworth band-pass filters as cascades of second-order sections
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy import signal

from .epochs import SAMPLING_RATE_HZ
from .errors import UnstableDesign, UsageError

logger = logging.getLogger(__name__)

BAND_ORDER = ("delta", "theta", "alpha", "beta", "gamma")


@dataclass(frozen=True)
class BandSpec:
    name: str
    low_hz: float
    high_hz: float
    order: int = 4

    def __post_init__(self):
        if self.name not in BAND_ORDER:
            raise UsageError(f"Unknown band '{self.name}', expected one of {', '.join(BAND_ORDER)}")
        if not 0 < self.low_hz < self.high_hz <= SAMPLING_RATE_HZ / 2:
            raise UsageError(
                f"Band {self.name} needs 0 < low < high <= {SAMPLING_RATE_HZ / 2} Hz, "
                f"got {self.low_hz}-{self.high_hz}"
            )
        if self.order < 1:
            raise UsageError(f"Filter order must be >= 1, got {self.order}")


@dataclass(frozen=True)
class BiquadChain:
    """Second-order sections, one row (b0, b1, b2, 1, a1, a2) each"""

    sos: np.ndarray

    @property
    def sections(self) -> List[Tuple[float, float, float, float, float]]:
        return [(s[0], s[1], s[2], s[4], s[5]) for s in self.sos]

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots([1.0, s[4], s[5]]) for s in self.sos])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))


def bands_from_config(bands: Mapping[str, Sequence[float]], order: int) -> List[BandSpec]:
    """Band specs in delta..gamma order from the 'bands' config mapping"""
    missing = [name for name in BAND_ORDER if name not in bands]
    if missing:
        raise UsageError(f"Band configuration is missing: {', '.join(missing)}")
    return [BandSpec(name, float(bands[name][0]), float(bands[name][1]), order) for name in BAND_ORDER]


def design_bandpass(spec: BandSpec, fs: float = SAMPLING_RATE_HZ) -> BiquadChain:
    """Butterworth band-pass via the pre-warped bilinear transform"""
    if spec.high_hz >= fs / 2:
        raise UsageError(f"Band {spec.name} upper edge {spec.high_hz} Hz must be below Nyquist ({fs / 2} Hz)")
    sos = signal.butter(spec.order, [spec.low_hz, spec.high_hz], btype="bandpass", fs=fs, output="sos")
    chain = BiquadChain(sos=sos)
    if not chain.is_stable():
        raise UnstableDesign(f"Band {spec.name} filter has a pole on or outside the unit circle")
    logger.debug(f"Designed {spec.name} band-pass {spec.low_hz}-{spec.high_hz} Hz, {len(sos)} sections")
    return chain


def design_bank(bands: Sequence[BandSpec], fs: float = SAMPLING_RATE_HZ) -> Dict[str, BiquadChain]:
    return {band.name: design_bandpass(band, fs) for band in bands}


def filter_signal(x: np.ndarray, chain: BiquadChain) -> np.ndarray:
    """Causal single pass, zero initial state"""
    return signal.sosfilt(chain.sos, np.asarray(x, dtype=np.float64))


def magnitude_at(chain: BiquadChain, hz: float, fs: float = SAMPLING_RATE_HZ) -> float:
    _, response = signal.sosfreqz(chain.sos, worN=[hz], fs=fs)
    return float(np.abs(response[0]))
