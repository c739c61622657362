import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as scipy_stats

from sleepstack.core.errors import DegenerateSamples, GroupTooSmall
from sleepstack.core.stats import (
    AnovaResult,
    f_survival,
    kde,
    minmax_scale,
    one_way_anova,
    silverman_bandwidth,
)


def test_anova_two_groups():
    result = one_way_anova([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert result.f_stat == pytest.approx(13.5)
    assert (result.df_between, result.df_within) == (1, 4)
    assert result.p_value == pytest.approx(scipy_stats.f.sf(13.5, 1, 4))
    assert not result.zero_within_variance


def test_anova_matches_reference(rng):
    groups = [rng.normal(0.0, 1.0, 40), rng.normal(0.3, 1.0, 55), rng.normal(-0.2, 2.0, 30)]
    ours = one_way_anova(groups)
    reference = scipy_stats.f_oneway(*groups)
    assert ours.f_stat == pytest.approx(reference.statistic)
    assert ours.p_value == pytest.approx(reference.pvalue, rel=1e-9)


def test_f_survival_edges():
    assert f_survival(0.0, 1, 10) == 1.0
    assert f_survival(math.inf, 1, 10) == 0.0
    assert f_survival(1.0, 2, 2) == pytest.approx(0.5)


def test_zero_within_variance_with_distinct_means():
    result = one_way_anova([[1.0, 1.0], [2.0, 2.0]])
    assert math.isinf(result.f_stat)
    assert result.p_value == 0.0
    assert result.zero_within_variance


def test_identical_constant_groups():
    result = one_way_anova([[3.0, 3.0], [3.0, 3.0]])
    assert (result.f_stat, result.p_value) == (0.0, 1.0)


def test_groups_need_two_samples():
    with pytest.raises(GroupTooSmall):
        one_way_anova([[1.0], [2.0, 3.0]])
    with pytest.raises(GroupTooSmall):
        one_way_anova([[1.0, 2.0]])


def test_p_text_floor():
    assert AnovaResult(1e4, 1, 100, 0.0).p_text() == "<1e-300"
    assert AnovaResult(1.0, 1, 100, 0.25).p_text() == "0.25"


def test_kde_matches_gaussian_sum(rng):
    samples = rng.normal(size=50)
    grid = np.linspace(-3, 3, 7)
    curve = kde(samples, bandwidth=0.4, grid=grid)

    expected = np.exp(-0.5 * ((grid[:, None] - samples[None, :]) / 0.4) ** 2).sum(axis=1)
    expected /= samples.size * 0.4 * np.sqrt(2 * np.pi)
    np.testing.assert_allclose(curve.density, expected, rtol=1e-10)
    assert curve.bandwidth == 0.4


def test_kde_default_grid_integrates_to_one(rng):
    samples = rng.normal(size=200)
    curve = kde(samples)
    assert curve.grid.size == 512
    assert curve.bandwidth == pytest.approx(silverman_bandwidth(samples))
    assert integrate.trapezoid(curve.density, curve.grid) == pytest.approx(1.0, abs=1e-3)


def test_kde_degenerate_samples():
    with pytest.raises(DegenerateSamples):
        kde([1.0])
    with pytest.raises(DegenerateSamples):
        kde([2.0, 2.0, 2.0])


def test_minmax_scale():
    np.testing.assert_allclose(minmax_scale([2.0, 4.0, 6.0]), [0.0, 0.5, 1.0])
    np.testing.assert_allclose(minmax_scale([2.0, 4.0], low=0.0, high=8.0), [0.25, 0.5])
    assert minmax_scale([5.0, 5.0]).tolist() == [0.0, 0.0]


def test_anova_shifted_groups_is_exact():
    result = one_way_anova([[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]])
    assert result.f_stat == 1.5
    assert (result.df_between, result.df_within) == (1, 4)


def f_density(x, d1, d2):
    log_beta = math.lgamma(d1 / 2) + math.lgamma(d2 / 2) - math.lgamma((d1 + d2) / 2)
    log_f = 0.5 * (d1 * math.log(d1 * x) + d2 * math.log(d2) - (d1 + d2) * math.log(d1 * x + d2))
    return math.exp(log_f - math.log(x) - log_beta)


@pytest.mark.parametrize("df_between", [1, 4, 10])
@pytest.mark.parametrize("df_within", [1, 4, 10])
@pytest.mark.parametrize("f_stat", [0.25, 1.5, 6.0])
def test_f_survival_matches_integrated_density(f_stat, df_between, df_within):
    tail, _ = integrate.quad(
        f_density, f_stat, math.inf, args=(df_between, df_within), epsabs=1e-12, limit=200
    )
    assert f_survival(f_stat, df_between, df_within) == pytest.approx(tail, abs=1e-6)


def test_anova_ignores_common_shift_and_scale(rng):
    for _ in range(50):
        groups = [rng.normal(rng.normal(), 1.0, int(rng.integers(2, 20))) for _ in range(int(rng.integers(2, 5)))]
        shift, scale = rng.uniform(-100.0, 100.0), rng.uniform(0.01, 100.0)
        base = one_way_anova(groups)
        assert one_way_anova([g + shift for g in groups]).f_stat == pytest.approx(base.f_stat, rel=1e-9)
        assert one_way_anova([g * scale for g in groups]).f_stat == pytest.approx(base.f_stat, rel=1e-9)
