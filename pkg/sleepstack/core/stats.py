"""
One-way ANOVA, Gaussian kernel density curves and min-max scaling
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import special, stats

from .errors import DegenerateSamples, GroupTooSmall

logger = logging.getLogger(__name__)

P_VALUE_FLOOR = 1e-300


@dataclass
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float
    zero_within_variance: bool = False

    def p_text(self) -> str:
        return f"<{P_VALUE_FLOOR:g}" if self.p_value < P_VALUE_FLOOR else f"{self.p_value:.6g}"


def f_survival(f_stat: float, df_between: int, df_within: int) -> float:
    """P(F > f) through the regularized incomplete beta function"""
    if f_stat <= 0:
        return 1.0
    if math.isinf(f_stat):
        return 0.0
    x = df_within / (df_within + df_between * f_stat)
    return float(special.betainc(df_within / 2.0, df_between / 2.0, x))


def one_way_anova(groups: Sequence[Sequence[float]]) -> AnovaResult:
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2:
        raise GroupTooSmall(f"ANOVA needs at least 2 groups, got {len(arrays)}")
    for i, a in enumerate(arrays):
        if a.size < 2:
            raise GroupTooSmall(f"Group {i} has {a.size} sample(s), need at least 2")

    n = sum(a.size for a in arrays)
    grand = np.concatenate(arrays).mean()
    ss_between = float(sum(a.size * (a.mean() - grand) ** 2 for a in arrays))
    ss_within = float(sum(np.sum((a - a.mean()) ** 2) for a in arrays))
    df_between = len(arrays) - 1
    df_within = n - len(arrays)

    if ss_within == 0:
        if ss_between > 0:
            logger.warning("Zero within-group variance with distinct group means; reporting p = 0")
            return AnovaResult(math.inf, df_between, df_within, 0.0, zero_within_variance=True)
        return AnovaResult(0.0, df_between, df_within, 1.0)

    f_stat = (ss_between / df_between) / (ss_within / df_within)
    return AnovaResult(f_stat, df_between, df_within, f_survival(f_stat, df_between, df_within))


@dataclass
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def silverman_bandwidth(samples: np.ndarray) -> float:
    return 1.06 * float(np.std(samples, ddof=1)) * samples.size ** (-1.0 / 5.0)


def kde(
    samples: Sequence[float],
    bandwidth: Union[str, float] = "auto",
    grid: Optional[np.ndarray] = None,
    points: int = 512,
) -> KdeCurve:
    """
    Gaussian kernel density estimate

    The default grid spans four bandwidths beyond the sample range.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise DegenerateSamples(f"KDE needs at least 2 samples, got {x.size}")
    sigma = float(np.std(x, ddof=1))
    if not sigma > 0:
        raise DegenerateSamples("KDE samples have zero variance")
    h = silverman_bandwidth(x) if bandwidth == "auto" else float(bandwidth)
    if grid is None:
        grid = np.linspace(x.min() - 4 * h, x.max() + 4 * h, points)
    estimator = stats.gaussian_kde(x, bw_method=h / sigma)
    return KdeCurve(grid=np.asarray(grid), density=estimator(grid), bandwidth=h)


def minmax_scale(values: Sequence[float], low: Optional[float] = None, high: Optional[float] = None) -> np.ndarray:
    """Map values to [0, 1] using [low, high], the values' own range by default"""
    v = np.asarray(values, dtype=np.float64)
    low = float(v.min()) if low is None else low
    high = float(v.max()) if high is None else high
    if high == low:
        return np.zeros_like(v)
    return (v - low) / (high - low)
