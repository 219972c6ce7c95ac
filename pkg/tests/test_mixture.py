import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from dsb_lab.ddp_core import DiscreteMeasure
from dsb_lab.mixture import (
    STIRLING_CONSTANT,
    CoverageError,
    DensityGrid,
    MixtureKernelSpec,
    SupportError,
    beta_diagonal_density,
    check_decay_condition,
    diagonal_growth_exponent,
    hellinger,
    kl_divergence,
    l1_distance,
    mixture_density,
    refined_distance,
    sup_distance,
)

GAUSS = MixtureKernelSpec("gaussian_loc")
GRID = GAUSS.grid()


def _normal(mu, sd=1.0):
    return stats.norm(mu, sd).pdf(GRID.nodes)


def _mix(atoms, weights, gamma=1.0, kernel=GAUSS, grid=GRID):
    return mixture_density(DiscreteMeasure(np.asarray(atoms, float)[:, None], weights), kernel, gamma, grid)


# -- kernels and densities -----------------------------------------------------


def test_grid_construction():
    g = DensityGrid.uniform(0.0, 1.0, 5)
    np.testing.assert_allclose(g.weights, [0.125, 0.25, 0.25, 0.25, 0.125])
    assert len(g.refine()) == 9
    with pytest.raises(ValueError):
        DensityGrid(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        DensityGrid.uniform(1.0, 1.0)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        MixtureKernelSpec("cauchy")
    with pytest.raises(ValueError, match="Y = \\[0, 1\\]"):
        MixtureKernelSpec("beta_constrained", y_lo=-1.0, y_hi=1.0)
    with pytest.raises(ValueError, match="gamma_min"):
        MixtureKernelSpec("gaussian_loc", gamma_min=0.0)
    with pytest.raises(ValueError, match="gamma"):
        GAUSS.check_gamma(20.0)
    with pytest.raises(ValueError, match="parameter space"):
        MixtureKernelSpec("beta_constrained").check_atoms(np.array([[6.0]]))


def test_single_atom_gives_kernel():
    dens = _mix([0.4], [1.0], gamma=0.7)
    np.testing.assert_array_equal(dens, GAUSS.psi(GRID.nodes, 0.7, np.array([[0.4]]))[0])
    np.testing.assert_allclose(dens, stats.norm(0.4, 0.7).pdf(GRID.nodes), rtol=1e-12, atol=1e-300)


def test_symmetric_mixture():
    dens = _mix([-1.0, 1.0], [0.5, 0.5])
    np.testing.assert_allclose(dens, dens[::-1], rtol=0, atol=1e-12)


@pytest.mark.parametrize("kernel, gamma, atoms", [
    (GAUSS, 0.05, [[0.0], [3.0]]),
    (GAUSS, 1.5, [[-1.0], [2.0]]),
    (MixtureKernelSpec("beta_constrained"), 1.0, [[1.0], [5.0]]),
    (MixtureKernelSpec("beta_constrained"), 1.3, [[1.01], [1.7]]),
    (MixtureKernelSpec("beta_constrained"), 40.0, [[1.5], [4.5]]),
    (MixtureKernelSpec("beta_constrained"), 50.0, [[1.1], [2.0]]),
])
def test_normalization_against_refined_grid(kernel, gamma, atoms):
    m = DiscreteMeasure(np.array(atoms), [0.3, 0.7])
    grid = kernel.grid()
    coarse = grid.integral(mixture_density(m, kernel, gamma, grid))
    fine_grid = grid.refine().refine()
    fine = fine_grid.integral(mixture_density(m, kernel, gamma, fine_grid))
    assert abs(coarse - 1.0) < 1e-6
    assert abs(coarse - fine) < 1e-6


def test_clustered_grid():
    g = DensityGrid.clustered(0.0, 1.0, 11)
    assert len(g) == 9 and g.kind == "clustered"
    assert (g.lo, g.hi) == (0.0, 1.0)
    assert g.integral(np.ones(len(g))) == pytest.approx(1.0, abs=1e-14)
    assert len(g.refine()) == 19
    assert g.refine().kind == "clustered"
    # a Beta(1, 1.5) density has an unbounded derivative at y = 1
    k = MixtureKernelSpec("beta_constrained")
    dens = k.psi(k.grid().nodes, 50.0, np.array([[1.5]]))[0]
    assert abs(k.grid().integral(dens) - 1.0) < 1e-8


def test_coverage_error():
    narrow = DensityGrid.uniform(-1.0, 1.0, 201)
    with pytest.raises(CoverageError, match="captures"):
        _mix([5.0], [1.0], grid=narrow)


def test_beta_free_refused_for_mixtures():
    k = MixtureKernelSpec("beta_free")
    with pytest.raises(ValueError, match="decay"):
        mixture_density(DiscreteMeasure(np.array([[2.0, 2.0]]), [1.0]), k, None, k.grid())


# -- distances ---------------------------------------------------------------


def test_hellinger_examples():
    p, q = _normal(0.0), _normal(1.0)
    assert hellinger(p, p, GRID) == 0.0
    assert hellinger(p, q, GRID) == pytest.approx(math.sqrt(1.0 - math.exp(-1.0 / 8.0)), abs=1e-4)
    assert hellinger(p, q, GRID) == pytest.approx(0.3428, abs=1e-4)
    g = DensityGrid.uniform(0.0, 2.0, 201)
    left = np.where(g.nodes < 1.0, 1.0, 0.0)
    right = np.where(g.nodes > 1.0, 1.0, 0.0)
    assert hellinger(left, right, g) == 1.0


def test_sup_examples():
    p = _normal(0.0)
    assert sup_distance(p, p) == 0.0
    assert sup_distance(p + 0.25, p) == pytest.approx(0.25, abs=1e-15)


def test_kl_examples():
    p, q = _normal(0.0), _normal(1.0)
    assert kl_divergence(p, p, GRID) == 0.0
    assert kl_divergence(p, q, GRID) == pytest.approx(0.5, abs=1e-3)


def test_kl_asymmetry_against_quadrature():
    p = _normal(0.0)
    q = 0.5 * _normal(-1.0) + 0.5 * _normal(1.0)
    fp = stats.norm(0, 1).pdf
    fq = lambda y: 0.5 * stats.norm(-1, 1).pdf(y) + 0.5 * stats.norm(1, 1).pdf(y)
    pq, _ = integrate.quad(lambda y: fp(y) * math.log(fp(y) / fq(y)), -12, 12, epsabs=1e-12)
    qp, _ = integrate.quad(lambda y: fq(y) * math.log(fq(y) / fp(y)), -12, 12, epsabs=1e-12)
    assert kl_divergence(p, q, GRID) == pytest.approx(pq, abs=1e-6)
    assert kl_divergence(q, p, GRID) == pytest.approx(qp, abs=1e-6)
    assert abs(pq - qp) > 1e-3


def test_kl_support_error_and_zero_convention():
    g = DensityGrid.uniform(0.0, 1.0, 11)
    p = np.r_[np.zeros(5), np.full(6, 1.0)]
    q = np.full(11, 1.0)
    assert kl_divergence(p, q, g) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(SupportError):
        kl_divergence(q, p, g)


def test_refined_distance_converges():
    f = lambda y: stats.norm(0, 1).pdf(y)
    h = lambda y: stats.norm(1, 1).pdf(y)
    val, grid = refined_distance(f, h, DensityGrid.uniform(-12, 12, 101))
    assert val == pytest.approx(math.sqrt(1 - math.exp(-1 / 8)), abs=1e-6)
    assert len(grid) > 101


_loc = st.floats(-3, 3)


@settings(max_examples=60, deadline=None)
@given(_loc, _loc, st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.05, 0.95))
def test_distance_inequalities(m1, m2, s1, s2, w):
    p = w * _normal(m1, s1) + (1 - w) * _normal(-m1, s1)
    q = _normal(m2, s2)
    h = hellinger(p, q, GRID)
    l1 = l1_distance(p, q, GRID)
    assert 0.0 <= h <= 1.0
    assert h == pytest.approx(hellinger(q, p, GRID), abs=1e-12)
    assert h * h <= 0.5 * l1 + 1e-9
    assert l1 <= 2.0 * math.sqrt(2.0) * h + 1e-9
    if np.all(q[p > 0] > 0):  # narrow q can underflow in the far tails
        assert kl_divergence(p, q, GRID) >= -1e-9
    assert sup_distance(p, q) == sup_distance(q, p) >= 0.0


def test_mixture_l1_deterministic_modulus():
    # weakly continuous synthetic field: atoms move linearly in x
    base = np.array([-1.0, 0.3, 2.0])
    w = np.array([0.2, 0.5, 0.3])
    at = lambda x: _mix(base + 0.7 * x, w, gamma=0.8)
    ref = at(0.0)
    dists = [l1_distance(at(d), ref, GRID) for d in (1.0, 0.5, 0.25, 0.125, 0.0625)]
    assert all(b < a for a, b in zip(dists, dists[1:]))
    assert dists[-1] < 0.05


# -- decay condition -----------------------------------------------------------


def test_decay_gaussian_passes():
    rep = check_decay_condition(GAUSS, 0.0, 1.0, 0.01)
    assert rep.passed
    # past 4 gamma from y0 the sup is below 0.01
    after = [v for s, v in zip(rep.shells, rep.profile) if s >= 4.0]
    assert after and max(after) < 0.01
    assert rep.profile == sorted(rep.profile, reverse=True)


def test_decay_beta_constrained_passes_vacuously():
    rep = check_decay_condition(MixtureKernelSpec("beta_constrained"), 0.5, 2.0, 1e-3)
    assert rep.passed
    assert rep.profile[-1] == 0.0


@pytest.mark.parametrize("eps", [1e-3, 1.0, 1e3, 1e6])
def test_decay_beta_free_fails(eps):
    rep = check_decay_condition(MixtureKernelSpec("beta_free"), 0.5, None, eps)
    assert not rep.passed
    assert 0.45 <= rep.growth_exponent <= 0.55


def test_beta_free_stirling_limit():
    def exact(t):
        # psi(1/2, t, t) = 2**(2 - 2t) / B(t, t), via log-gamma
        return math.exp((2 - 2 * t) * math.log(2) - (2 * math.lgamma(t) - math.lgamma(2 * t)))

    assert STIRLING_CONSTANT == pytest.approx(2**1.5 / math.sqrt(2 * math.pi))
    for t in (10.0, 100.0, 400.0):
        assert beta_diagonal_density(t) == pytest.approx(exact(t), rel=1e-10)
    assert exact(400.0) / math.sqrt(400.0) == pytest.approx(STIRLING_CONSTANT, rel=0.02)
    assert diagonal_growth_exponent() == pytest.approx(0.5, abs=0.01)


def test_decay_shells_must_nest():
    with pytest.raises(ValueError, match="increasing"):
        check_decay_condition(GAUSS, 0.0, 1.0, 0.01, shells=[2.0, 1.0])
    with pytest.raises(ValueError):
        check_decay_condition(GAUSS, 0.0, 1.0, 0.0)
