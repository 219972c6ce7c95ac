import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import optimize, stats

from dsb_lab.index_space import Box, build_grid, ladder_locations
from dsb_lab.latent_field import CovKernelSpec, LatentField, standard_cdf
from dsb_lab.stick_process import (
    MAX_TRUNCATION,
    StickSpec,
    beta_quantile,
    expected_tail,
    gauss_to_stick,
    sample_stick_matrix,
    stick_weights,
    truncation_for,
)
from dsb_lab.streams import stream


def _field(values, kernel=CovKernelSpec()):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    locs = build_grid(Box((0.0,), (1.0,)), len(values))
    return LatentField(locs, values)


def test_beta_quantile_examples():
    assert beta_quantile(0.3, 1.0) == pytest.approx(0.3, abs=1e-15)
    assert beta_quantile(1.0, 0.7) == 1.0
    assert beta_quantile(0.75, 2.0) == pytest.approx(0.5, abs=1e-15)
    assert beta_quantile(0.0, 3.0) == 0.0


@pytest.mark.parametrize("t", [-0.1, 1.1, math.nan])
def test_beta_quantile_rejects_out_of_range(t):
    with pytest.raises(ValueError):
        beta_quantile(t, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.05, 50))
def test_beta_quantile_monotone(u, v, alpha):
    if u <= v:
        assert beta_quantile(u, alpha) <= beta_quantile(v, alpha)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.05, 1))
def test_beta_quantile_lipschitz_small_alpha(u, v, alpha):
    # derivative (1/alpha) (1 - t)**(1/alpha - 1) is at most 1/alpha when alpha <= 1
    assert abs(beta_quantile(u, alpha) - beta_quantile(v, alpha)) <= abs(u - v) / alpha + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(1, 50))
def test_beta_quantile_hoelder_large_alpha(u, v, alpha):
    # for alpha >= 1 the map is only Hoelder of order 1/alpha near t = 1
    assert abs(beta_quantile(u, alpha) - beta_quantile(v, alpha)) <= abs(u - v) ** (1 / alpha) + 1e-12


def test_gauss_to_stick_examples():
    k = CovKernelSpec(sigma0=4.0, tau=1.0, mean=1.5)
    spec = StickSpec(alpha=1.0, kernel=k, truncation=1)
    assert gauss_to_stick(_field([1.5]), spec)[0] == 0.5
    assert gauss_to_stick(_field([1.5 + 2.0 * -40]), spec)[0] < 1e-300


def test_gauss_to_stick_quarter_via_numeric_inversion():
    k = CovKernelSpec(sigma0=2.25, tau=1.0, mean=-0.3)
    spec = StickSpec(alpha=1.0, kernel=k, truncation=1)
    # oracle: invert the standard c.d.f. numerically rather than calling a ppf
    q = optimize.brentq(lambda z: standard_cdf(z) - 0.25, -10, 10, xtol=1e-14)
    v = gauss_to_stick(_field([k.mean + 1.5 * q]), spec)[0]
    assert v == pytest.approx(0.25, abs=1e-9)


def test_stick_weights_examples():
    tw = stick_weights([0.5, 0.5, 0.5])
    np.testing.assert_allclose(tw.weights[:, 0], [0.5, 0.25, 0.125])
    assert tw.tail[0] == 0.125

    tw = stick_weights([1.0, 0.3, 0.9])
    np.testing.assert_array_equal(tw.weights[:, 0], [1.0, 0.0, 0.0])
    assert tw.tail[0] == 0.0

    tw = stick_weights(np.zeros((4, 2)))
    np.testing.assert_array_equal(tw.weights, 0.0)
    np.testing.assert_array_equal(tw.tail, 1.0)


def test_stick_weights_rejects_out_of_range():
    with pytest.raises(ValueError):
        stick_weights([0.5, 1.5])


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(float, st.tuples(st.integers(1, 60), st.integers(1, 4)), elements=st.floats(0, 1)))
def test_stick_weights_sum_with_tail(V):
    tw = stick_weights(V)
    assert np.all(tw.weights >= 0) and np.all(tw.tail >= 0)
    for j in range(V.shape[1]):
        assert abs(math.fsum(tw.weights[:, j]) + tw.tail[j] - 1.0) <= 1e-12


def test_expected_tail_examples_against_monte_carlo():
    assert expected_tail(1.0, 0) == 1.0
    assert expected_tail(1.0, 10) == pytest.approx(9.7656e-4, rel=1e-4)
    assert expected_tail(1.0, 1) == 0.5
    rng = stream(99)
    for n, value in [(1, expected_tail(1.0, 1)), (10, expected_tail(1.0, 10))]:
        prod = np.prod(1.0 - rng.beta(1.0, 1.0, size=(1_000_000, n)), axis=1)
        se = prod.std(ddof=1) / math.sqrt(prod.size)
        assert abs(prod.mean() - value) < 4 * se


def test_weight_moments_monte_carlo():
    alpha = 2.0
    V = stream(7).beta(1.0, alpha, size=(5, 100_000))
    w = stick_weights(V).weights
    for i in range(5):
        target = (1.0 / (1.0 + alpha)) * (alpha / (1.0 + alpha)) ** i
        se = w[i].std(ddof=1) / math.sqrt(w.shape[1])
        assert abs(w[i].mean() - target) < 3 * se


def test_alpha_invariants():
    with pytest.raises(ValueError, match="alpha_min"):
        StickSpec(alpha=0.0)
    with pytest.raises(ValueError, match="alpha_min"):
        StickSpec(alpha=lambda x: 1.0)
    with pytest.raises(ValueError):
        StickSpec(truncation=0)
    spec = StickSpec(alpha=lambda x: 1.0 + x[0], alpha_min=0.5, truncation=3)
    np.testing.assert_allclose(spec.alpha_at(build_grid(Box((0.0,), (1.0,)), 3)), [1.0, 1.5, 2.0])
    low = StickSpec(alpha=lambda x: 0.1, alpha_min=0.5, truncation=3)
    with pytest.raises(ValueError, match="below alpha_min"):
        low.alpha_at(build_grid(Box((0.0,), (1.0,)), 2))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0, 10.0])
def test_default_truncation_is_smallest_meeting_target(alpha):
    n = StickSpec(alpha=alpha).n_sticks
    assert expected_tail(alpha, n) < 1e-6
    assert expected_tail(alpha, n - 1) >= 1e-6


def test_truncation_capped():
    assert truncation_for(1e4, 1e-6) == MAX_TRUNCATION


@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
def test_marginal_ks_on_grid(alpha):
    locs = build_grid(Box((0.0,), (1.0,)), 5)
    spec = StickSpec(alpha=alpha, kernel=CovKernelSpec(1.0, 0.3), truncation=10_000)
    V = sample_stick_matrix(spec, locs, stream(2024, int(alpha * 10)))
    for j in range(len(locs)):
        assert stats.kstest(V[:, j], stats.beta(1.0, alpha).cdf).pvalue > 0.01


def test_functional_alpha_marginals():
    locs = build_grid(Box((0.0,), (1.0,)), 3)
    spec = StickSpec(alpha=lambda x: 0.5 + 2.0 * x[0], alpha_min=0.5, truncation=10_000)
    V = sample_stick_matrix(spec, locs, stream(31))
    for j, a in enumerate([0.5, 1.5, 2.5]):
        assert stats.kstest(V[:, j], stats.beta(1.0, a).cdf).pvalue > 0.01


def test_shared_sticks_constant_across_locations():
    locs = build_grid(Box((0.0,), (1.0,)), 4)
    V = sample_stick_matrix(StickSpec(truncation=20), locs, stream(1), dependent=False)
    assert np.all(V == V[:, :1])
    with pytest.raises(ValueError):
        sample_stick_matrix(StickSpec(alpha=lambda x: 1.0, alpha_min=1.0, truncation=2), locs, stream(1), dependent=False)


def test_path_regularity_surrogate():
    locs, idx = ladder_locations([0.0], [1.0, 0.5, 0.25, 0.125])
    spec = StickSpec(alpha=1.0, kernel=CovKernelSpec(1.0, 1.0), truncation=10_000)
    V = sample_stick_matrix(spec, locs, stream(8))
    diffs = np.abs(V[:, idx] - V[:, [0]])
    means = diffs.mean(axis=0)
    se = diffs.std(axis=0, ddof=1) / math.sqrt(V.shape[0])
    for a in range(len(means) - 1):
        assert means[a + 1] <= means[a] + 2 * math.hypot(se[a], se[a + 1])
