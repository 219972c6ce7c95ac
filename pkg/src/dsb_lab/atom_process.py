"""Atom sequences: iid atoms, Gaussian-pushforward atom fields, circle wrap."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .index_space import LocationSet
from .latent_field import CovKernelSpec, sample_standardized

TWO_PI = 2.0 * math.pi
VARIANTS = ("iid", "field", "circle")


@dataclass(frozen=True)
class Marginal:
    """Per-coordinate atom law: ``normal`` (loc, scale) or ``uniform`` [lower, upper]."""

    family: str = "normal"
    loc: float = 0.0
    scale: float = 1.0
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.family not in ("normal", "uniform"):
            raise ValueError(f"unknown marginal family {self.family!r}")
        if self.family == "normal" and not self.scale > 0:
            raise ValueError(f"normal marginal needs scale > 0, got {self.scale}")
        if self.family == "uniform" and not self.lower < self.upper:
            raise ValueError(f"uniform marginal needs lower < upper, got [{self.lower}, {self.upper}]")

    def from_standard(self, u):
        """Quantile of this law evaluated at ``Phi(u)``."""
        if self.family == "normal":
            return self.loc + self.scale * u
        return self.lower + (self.upper - self.lower) * special.ndtr(u)

    def box(self) -> tuple[float, float]:
        """Interval holding essentially all of the mass, used to lay out test panels."""
        if self.family == "normal":
            return self.loc - 3.0 * self.scale, self.loc + 3.0 * self.scale
        return self.lower, self.upper

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "normal":
            return special.ndtr((x - self.loc) / self.scale)
        return np.clip((x - self.lower) / (self.upper - self.lower), 0.0, 1.0)


@dataclass(frozen=True)
class AtomSpec:
    theta_dim: int = 1
    marginals: tuple = (Marginal(),)
    kernel: CovKernelSpec = CovKernelSpec()
    variant_hint: str = "field"

    def __post_init__(self):
        if int(self.theta_dim) != self.theta_dim or self.theta_dim < 1:
            raise ValueError("theta_dim must be a positive integer")
        marg = tuple(self.marginals) if not isinstance(self.marginals, Marginal) else (self.marginals,)
        if len(marg) == 1 and self.theta_dim > 1:
            marg = marg * self.theta_dim
        if len(marg) != self.theta_dim:
            raise ValueError("need one marginal per atom coordinate")
        object.__setattr__(self, "marginals", marg)
        if self.variant_hint not in VARIANTS:
            raise ValueError(f"variant_hint must be one of {VARIANTS}")
        if self.variant_hint == "circle" and self.theta_dim != 1:
            raise ValueError("circle-valued atoms require theta_dim = 1")

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.variant_hint == "circle":
            return np.array([0.0]), np.array([TWO_PI])
        lo, hi = zip(*(m.box() for m in self.marginals))
        return np.array(lo), np.array(hi)


@dataclass(frozen=True, eq=False)
class AtomField:
    """Atoms ``theta[i, x]`` stored as an ``(N, L, d)`` array."""

    atoms: np.ndarray
    variant: str

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise ValueError("atoms must be an N x L x d array")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown atom variant {self.variant!r}")
        if not np.all(np.isfinite(a)):
            raise ValueError("atom coordinates must be finite")
        if self.variant == "iid" and not np.all(a == a[:, :1, :]):
            raise ValueError("iid atoms must be constant across locations")
        if self.variant == "circle" and (np.any(a < 0) or np.any(a >= TWO_PI)):
            raise ValueError("circle atoms must lie in [0, 2*pi)")
        object.__setattr__(self, "atoms", a)

    @property
    def n_sticks(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_locations(self) -> int:
        return self.atoms.shape[1]

    @property
    def dim(self) -> int:
        return self.atoms.shape[2]


def _push(spec: AtomSpec, u: np.ndarray) -> np.ndarray:
    return np.stack([m.from_standard(u[..., j]) for j, m in enumerate(spec.marginals)], axis=-1)


def sample_iid_atoms(spec: AtomSpec, count: int, rng: np.random.Generator, n_locations: int = 1) -> AtomField:
    if count < 1:
        raise ValueError("count must be >= 1")
    theta = _push(spec, rng.standard_normal((count, spec.theta_dim)))
    atoms = np.repeat(theta[:, None, :], n_locations, axis=1)
    field = AtomField(atoms, "iid")
    return wrap_to_circle(field) if spec.variant_hint == "circle" else field


def sample_atom_field(spec: AtomSpec, locs: LocationSet, count: int, rng: np.random.Generator) -> AtomField:
    """Location-dependent atoms; coordinate ``j`` of row ``i`` is driven by its own latent field."""
    if count < 1:
        raise ValueError("count must be >= 1")
    u = sample_standardized(spec.kernel, locs, rng, count * spec.theta_dim)
    u = u.reshape(count, spec.theta_dim, len(locs)).transpose(0, 2, 1)
    field = AtomField(_push(spec, u), "field")
    return wrap_to_circle(field) if spec.variant_hint == "circle" else field


def wrap_to_circle(field: AtomField) -> AtomField:
    if field.dim != 1:
        raise ValueError("circle wrapping needs one-dimensional atoms")
    a = np.mod(field.atoms, TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    a[a >= TWO_PI] = 0.0
    if field.variant == "iid":
        a = np.repeat(a[:, :1, :], field.n_locations, axis=1)
    return AtomField(a, "circle")


def circle_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), TWO_PI))
    return np.minimum(d, TWO_PI - d)
