"""Induced mixture densities on quadrature grids and distances between them.

Densities live on a uniform trapezoid grid over an interval ``Y``.  Three
kernel families are provided:

``gaussian_loc``
    ``psi(y, gamma, theta) = N(y; theta, gamma^2)``, ``gamma`` a scale.
``beta_constrained``
    ``psi(y, alpha, beta) = Beta(y; alpha, beta)`` on [0, 1] with the atom
    ``beta`` confined to ``[1, beta_max]`` and ``gamma = alpha`` in
    ``[1, alpha_max]``.
``beta_free``
    Beta kernel with both shape parameters in the atom and no compactness;
    it violates the decay condition and is refused by :func:`mixture_density`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .ddp_core import DiscreteMeasure

FAMILIES = ("gaussian_loc", "beta_constrained", "beta_free")
DEFAULT_NODES = 2001
MAX_REFINEMENTS = 3
NORMALIZATION_TOL = 1e-6
COVERAGE_MIN = 0.999
LOG_FLOOR = 1e-300
STIRLING_CONSTANT = 2.0**1.5 / math.sqrt(2.0 * math.pi)


class CoverageError(ValueError):
    pass


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class DensityGrid:
    """Quadrature nodes and positive weights on an interval of Y.

    ``kind="uniform"`` is the composite trapezoid rule.  ``kind="clustered"``
    is the trapezoid rule in ``u`` after the substitution
    ``y = lo + (hi - lo) (u - sin(2 pi u) / (2 pi))``, which packs nodes
    cubically toward both endpoints; it keeps Beta densities whose derivative
    blows up at 0 or 1 accurate to ~1e-10.  The endpoint nodes carry zero
    weight under the substitution and are dropped.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "uniform"
    interval: tuple | None = None

    def __post_init__(self):
        n = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if n.ndim != 1 or n.shape != w.shape or n.size < 2:
            raise ValueError("grid needs at least two nodes with matching weights")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if np.any(np.diff(n) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if self.kind not in ("uniform", "clustered"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        n.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "nodes", n)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "interval", (float(n[0]), float(n[-1])) if self.interval is None else tuple(map(float, self.interval)))

    def __eq__(self, other):
        return (
            isinstance(other, DensityGrid)
            and self.kind == other.kind
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.kind, self.nodes.tobytes(), self.weights.tobytes()))

    @classmethod
    def uniform(cls, lo: float, hi: float, nodes: int = DEFAULT_NODES) -> "DensityGrid":
        if not lo < hi:
            raise ValueError(f"degenerate interval [{lo}, {hi}]")
        if nodes < 2:
            raise ValueError("need at least two nodes")
        y = np.linspace(lo, hi, nodes)
        h = (hi - lo) / (nodes - 1)
        w = np.full(nodes, h)
        w[0] = w[-1] = h / 2
        return cls(y, w)

    @classmethod
    def clustered(cls, lo: float, hi: float, nodes: int = DEFAULT_NODES) -> "DensityGrid":
        """Endpoint-clustered rule with ``nodes - 2`` interior nodes (see class docstring)."""
        if not lo < hi:
            raise ValueError(f"degenerate interval [{lo}, {hi}]")
        if nodes < 4:
            raise ValueError("need at least four nodes")
        u = np.linspace(0.0, 1.0, nodes)[1:-1]
        h = 1.0 / (nodes - 1)
        span = hi - lo
        y = lo + span * (u - np.sin(2.0 * math.pi * u) / (2.0 * math.pi))
        w = h * span * (1.0 - np.cos(2.0 * math.pi * u))
        return cls(y, w, "clustered", (lo, hi))

    @property
    def lo(self) -> float:
        return self.interval[0]

    @property
    def hi(self) -> float:
        return self.interval[1]

    def __len__(self) -> int:
        return self.nodes.size

    def refine(self) -> "DensityGrid":
        """Same interval and rule with the spacing halved."""
        if self.kind == "clustered":
            return DensityGrid.clustered(self.lo, self.hi, 2 * (len(self) + 1) + 1)
        return DensityGrid.uniform(self.lo, self.hi, 2 * (len(self) - 1) + 1)

    def integral(self, values) -> np.ndarray:
        return np.asarray(values) @ self.weights


@dataclass(frozen=True)
class MixtureKernelSpec:
    family: str = "gaussian_loc"
    y_lo: float | None = None
    y_hi: float | None = None
    gamma_min: float = 0.05
    gamma_max: float = 10.0
    beta_max: float = 5.0
    alpha_max: float = 50.0
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.family == "gaussian_loc":
            lo = -12.0 if self.y_lo is None else float(self.y_lo)
            hi = 12.0 if self.y_hi is None else float(self.y_hi)
            if not 0 < self.gamma_min <= self.gamma_max:
                raise ValueError("gaussian_loc needs 0 < gamma_min <= gamma_max")
        else:
            lo = 0.0 if self.y_lo is None else float(self.y_lo)
            hi = 1.0 if self.y_hi is None else float(self.y_hi)
            if (lo, hi) != (0.0, 1.0):
                raise ValueError("beta kernels live on Y = [0, 1]")
            if not self.beta_max >= 1 or not self.alpha_max >= 1:
                raise ValueError("beta_max and alpha_max must be >= 1")
        if not lo < hi:
            raise ValueError("degenerate Y interval")
        object.__setattr__(self, "y_lo", lo)
        object.__setattr__(self, "y_hi", hi)
        if self.validate:
            self._check_normalization()

    # parameter handling

    @property
    def theta_dim(self) -> int:
        return 2 if self.family == "beta_free" else 1

    @property
    def uses_gamma(self) -> bool:
        return self.family != "beta_free"

    def gamma_bounds(self) -> tuple[float, float]:
        if self.family == "gaussian_loc":
            return self.gamma_min, self.gamma_max
        return 1.0, self.alpha_max

    def theta_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.family == "gaussian_loc":
            return np.array([-np.inf]), np.array([np.inf])
        if self.family == "beta_constrained":
            return np.array([1.0]), np.array([self.beta_max])
        return np.array([1.0, 1.0]), np.array([np.inf, np.inf])

    def check_gamma(self, gamma) -> None:
        if not self.uses_gamma:
            return
        lo, hi = self.gamma_bounds()
        if not lo <= gamma <= hi:
            raise ValueError(f"gamma = {gamma} outside [{lo}, {hi}] for {self.family}")

    def check_atoms(self, atoms: np.ndarray) -> None:
        atoms = np.asarray(atoms, dtype=float)
        if atoms.shape[-1] != self.theta_dim:
            raise ValueError(f"{self.family} atoms have dimension {self.theta_dim}")
        lo, hi = self.theta_bounds()
        if np.any(atoms < lo) or np.any(atoms > hi):
            raise ValueError(f"atoms outside the {self.family} parameter space [{lo.tolist()}, {hi.tolist()}]")

    def grid(self, nodes: int = DEFAULT_NODES) -> DensityGrid:
        if self.family == "gaussian_loc":
            return DensityGrid.uniform(self.y_lo, self.y_hi, nodes)
        return DensityGrid.clustered(self.y_lo, self.y_hi, nodes)

    # kernel

    def psi(self, y, gamma, theta) -> np.ndarray:
        """Kernel values, shape ``(K, len(y))`` for ``K`` atoms of shape ``(K, d)``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        theta = np.asarray(theta, dtype=float)
        if theta.ndim <= 1:
            theta = theta.reshape(-1, self.theta_dim)
        if self.family == "gaussian_loc":
            z = (y[None, :] - theta[:, :1]) / gamma
            return np.exp(-0.5 * z * z) / (gamma * math.sqrt(2.0 * math.pi))
        if self.family == "beta_constrained":
            a = np.full((theta.shape[0], 1), float(gamma))
            b = theta[:, :1]
        else:
            a = theta[:, :1]
            b = theta[:, 1:2]
        logp = special.xlogy(a - 1.0, y[None, :]) + special.xlog1py(b - 1.0, -y[None, :]) - special.betaln(a, b)
        return np.exp(logp)

    def _check_normalization(self) -> None:
        if self.family == "gaussian_loc":
            span = self.y_hi - self.y_lo
            center = 0.5 * (self.y_lo + self.y_hi)
            g_hi = min(self.gamma_max, span / 16.0)
            gammas = sorted({self.gamma_min, math.sqrt(self.gamma_min * max(g_hi, self.gamma_min)), max(g_hi, self.gamma_min)})
            cases = [(g, np.array([[center]])) for g in gammas]
        elif self.family == "beta_constrained":
            # non-integer exponents near 1 are the hardest cases for quadrature
            cases = [(a, np.array([[b]])) for a in (1.0, 1.5, self.alpha_max) for b in (1.0, 1.5, self.beta_max)]
        else:
            cases = [(None, np.array([[a, b]])) for a in (1.0, 1.5, 5.0) for b in (1.0, 1.5, 5.0)]
        for gamma, theta in cases:
            grid = self.grid()
            err = math.inf
            for _ in range(MAX_REFINEMENTS + 1):
                err = abs(float(grid.integral(self.psi(grid.nodes, gamma, theta)[0])) - 1.0)
                if err <= NORMALIZATION_TOL:
                    break
                grid = grid.refine()
            if err > NORMALIZATION_TOL:
                raise ValueError(
                    f"{self.family} kernel at gamma={gamma}, theta={theta.ravel().tolist()} integrates to 1 only "
                    f"within {err:.3g} after {MAX_REFINEMENTS} refinements"
                )


def mixture_density(m: DiscreteMeasure, kernel: MixtureKernelSpec, gamma, grid: DensityGrid, check_coverage: bool = True) -> np.ndarray:
    """Density ``sum_i w_i psi(y, gamma, theta_i)`` at the grid nodes."""
    if kernel.family == "beta_free":
        raise ValueError("beta_free violates the decay condition and cannot be used to build mixtures")
    kernel.check_gamma(gamma)
    kernel.check_atoms(m.atoms)
    values = m.weights @ kernel.psi(grid.nodes, gamma, m.atoms)
    if check_coverage:
        mass = float(grid.integral(values))
        if mass < COVERAGE_MIN:
            raise CoverageError(f"grid [{grid.lo}, {grid.hi}] captures only {mass:.6f} of the mixture mass")
    return values


def mixture_density_batch(weights: np.ndarray, atoms: np.ndarray, kernel: MixtureKernelSpec, gammas, grid: DensityGrid) -> np.ndarray:
    """Densities for every (gamma, location) pair of a path, shape ``(G, L, nodes)``.

    ``weights`` is ``(L, N)`` and ``atoms`` ``(L, N, d)`` as in a measure field.
    """
    if kernel.family == "beta_free":
        raise ValueError("beta_free violates the decay condition and cannot be used to build mixtures")
    kernel.check_atoms(atoms)
    out = np.empty((len(gammas), weights.shape[0], len(grid)))
    for g, gamma in enumerate(gammas):
        kernel.check_gamma(gamma)
        for j in range(weights.shape[0]):
            out[g, j] = weights[j] @ kernel.psi(grid.nodes, gamma, atoms[j])
    return out


# -- distances ----------------------------------------------------------------


def _pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("densities must share a grid")
    return p, q


def hellinger(p, q, grid: DensityGrid) -> float:
    p, q = _pair(p, q)
    return math.sqrt(max(0.0, 1.0 - float(grid.integral(np.sqrt(p * q)))))


def l1_distance(p, q, grid: DensityGrid) -> float:
    p, q = _pair(p, q)
    return float(grid.integral(np.abs(p - q)))


def sup_distance(p, q) -> float:
    p, q = _pair(p, q)
    return float(np.max(np.abs(p - q)))


def kl_divergence(p, q, grid: DensityGrid) -> float:
    """``sum w p log(p/q)`` with ``0 log 0 = 0``; a zero of ``q`` under positive ``p`` raises."""
    p, q = _pair(p, q)
    pos = p > 0
    bad = pos & ~(q > 0)
    if np.any(bad):
        y = grid.nodes[np.argmax(bad)] if p.shape == grid.nodes.shape else None
        raise SupportError(f"q vanishes where p > 0 (first at y = {y})")
    ps = np.where(pos, p, LOG_FLOOR)
    qs = np.where(pos, q, 1.0)
    terms = np.where(pos, p * (np.log(ps) - np.log(qs)), 0.0)
    return float(grid.integral(terms))


def refined_distance(p_fn, q_fn, grid: DensityGrid, distance=hellinger, tol: float = 1e-6) -> tuple[float, DensityGrid]:
    """Distance between two density callables, doubling the grid until it settles.

    Stops once successive values differ by less than ``tol`` or after three
    refinements; returns the last value and the grid it used.
    """
    prev = distance(p_fn(grid.nodes), q_fn(grid.nodes), grid)
    for _ in range(MAX_REFINEMENTS):
        finer = grid.refine()
        cur = distance(p_fn(finer.nodes), q_fn(finer.nodes), finer)
        grid = finer
        if abs(cur - prev) < tol:
            return cur, grid
        prev = cur
    return prev, grid


# -- decay condition -----------------------------------------------------------


@dataclass
class DecayReport:
    family: str
    y0: float
    gamma0: float | None
    epsilon: float
    shells: list
    profile: list
    passed: bool
    growth_exponent: float | None = None
    stirling_ratio: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "y0": self.y0,
            "gamma0": self.gamma0,
            "epsilon": self.epsilon,
            "shells": list(self.shells),
            "profile": list(self.profile),
            "passed": self.passed,
            "growth_exponent": self.growth_exponent,
            "stirling_ratio": self.stirling_ratio,
            "note": self.note,
        }


def beta_diagonal_density(t):
    """``psi(1/2, t, t)`` for the Beta kernel, on the log scale internally."""
    t = np.asarray(t, dtype=float)
    return np.exp((2.0 * t - 2.0) * math.log(0.5) - special.betaln(t, t))


def diagonal_growth_exponent(t_lo: float = 100.0, t_hi: float = 400.0, points: int = 31) -> float:
    """Least-squares slope of ``log psi(1/2, t, t)`` against ``log t``."""
    t = np.geomspace(t_lo, t_hi, points)
    slope, _ = np.polyfit(np.log(t), np.log(beta_diagonal_density(t)), 1)
    return float(slope)


def _stays_below(profile, eps) -> bool:
    # a sup still growing on the outermost shells cannot stay below any epsilon
    if len(profile) >= 2 and profile[-1] > profile[-2]:
        return False
    below = [v < eps for v in profile]
    for k in range(len(below)):
        if all(below[k:]):
            return True
    return False


def default_shells(kernel: MixtureKernelSpec, gamma0=None) -> list:
    if kernel.family == "gaussian_loc":
        g = gamma0 if gamma0 is not None else kernel.gamma_min
        return [k * g for k in (0.5, 1, 2, 4, 6, 8, 12, 16)]
    if kernel.family == "beta_constrained":
        return [float(b) for b in np.linspace(1.0, kernel.beta_max, 5)[1:]]
    return [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]


def check_decay_condition(
    kernel: MixtureKernelSpec,
    y0: float,
    gamma0: float | None,
    epsilon: float,
    shells=None,
    y_radius: float = 0.01,
    gamma_radius: float | None = None,
    samples: int = 401,
) -> DecayReport:
    """Numeric sup of ``psi`` over a neighborhood of ``(y0, gamma0)`` and the complement of each shell.

    Shells are nested compacts in Theta given by a radius: ``|theta - y0| <= s``
    for ``gaussian_loc``, ``beta <= s`` for ``beta_constrained`` and
    ``max(alpha, beta) <= s`` for ``beta_free``.  The check passes when the
    profile of sups drops below ``epsilon`` and stays there.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    shells = list(default_shells(kernel, gamma0) if shells is None else shells)
    if any(b <= a for a, b in zip(shells, shells[1:])):
        raise ValueError("shells must be strictly increasing (nested)")

    ys = np.clip(np.linspace(y0 - y_radius, y0 + y_radius, 21), kernel.y_lo, kernel.y_hi)
    if kernel.uses_gamma:
        if gamma0 is None:
            raise ValueError(f"{kernel.family} needs gamma0")
        kernel.check_gamma(gamma0)
        gr = (0.01 * gamma0) if gamma_radius is None else gamma_radius
        glo, ghi = kernel.gamma_bounds()
        gammas = np.linspace(max(glo, gamma0 - gr), min(ghi, gamma0 + gr), 11)
    else:
        gammas = [None]

    profile = []
    for s in shells:
        if kernel.family == "gaussian_loc":
            reach = max(10.0 * float(np.max(gammas)), s)
            offs = s + np.linspace(0.0, reach, samples)[1:]
            thetas = np.concatenate([y0 - offs, y0 + offs])[:, None]
        elif kernel.family == "beta_constrained":
            if s >= kernel.beta_max:
                profile.append(0.0)
                continue
            thetas = np.linspace(s, kernel.beta_max, samples)[1:, None]
        else:
            cap = 4.0 * s
            out = np.linspace(s, cap, samples)[1:]
            inner = np.linspace(1.0, cap, 41)
            a, b = np.meshgrid(out, inner)
            thetas = np.vstack([
                np.column_stack([out, out]),
                np.column_stack([a.ravel(), b.ravel()]),
                np.column_stack([b.ravel(), a.ravel()]),
            ])
        sup = max(float(np.max(kernel.psi(ys, g, thetas))) for g in gammas)
        profile.append(sup)

    report = DecayReport(kernel.family, float(y0), gamma0, float(epsilon), shells, profile, _stays_below(profile, epsilon))
    if kernel.family == "beta_free":
        report.growth_exponent = diagonal_growth_exponent()
        report.stirling_ratio = float(beta_diagonal_density(400.0) / math.sqrt(400.0) / STIRLING_CONSTANT)
        report.note = "psi(1/2, t, t) grows like sqrt(t); no compact set in Theta controls it"
    elif kernel.family == "beta_constrained":
        report.note = "Theta is compact; shells reaching beta_max leave an empty complement"
    return report
