"""Beta(1, alpha) stick processes and truncated stick-breaking weights.

Sticks are built by pushing a Gaussian field through its own c.d.f. and
then through the Beta(1, alpha) quantile ``1 - (1 - t)**(1/alpha)``, so each
``V_x`` is exactly Beta(1, alpha(x)) and inherits path continuity from the
field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import special

from .index_space import LocationSet
from .latent_field import CovKernelSpec, LatentField, sample_standardized, standardize

MAX_TRUNCATION = 1000
DEFAULT_TAIL_TARGET = 1e-6

Alpha = Union[float, Callable[[np.ndarray], float]]


@dataclass(frozen=True)
class StickSpec:
    """Concentration, latent kernel and truncation for the V-processes.

    ``alpha`` is a positive constant or a function of an index point; a
    function must come with ``alpha_min``, a strictly positive lower bound.
    Give either ``truncation`` (number of sticks) or ``tail_target`` (the
    largest acceptable expected leftover mass); with neither, the tail target
    defaults to 1e-6.
    """

    alpha: Alpha = 1.0
    kernel: CovKernelSpec = CovKernelSpec()
    truncation: int | None = None
    tail_target: float | None = None
    alpha_min: float | None = None

    def __post_init__(self):
        if callable(self.alpha):
            if self.alpha_min is None:
                raise ValueError("a functional alpha needs alpha_min > 0")
            amin = float(self.alpha_min)
        else:
            a = float(self.alpha)
            if not math.isfinite(a):
                raise ValueError("alpha must be finite")
            object.__setattr__(self, "alpha", a)
            amin = a if self.alpha_min is None else min(a, float(self.alpha_min))
        if not amin > 0:
            raise ValueError(f"alpha must be strictly positive (alpha_min > 0), got alpha_min = {amin}")
        object.__setattr__(self, "alpha_min", amin)
        if self.truncation is not None:
            if int(self.truncation) != self.truncation or self.truncation < 1:
                raise ValueError(f"truncation must be an integer >= 1, got {self.truncation}")
            object.__setattr__(self, "truncation", int(self.truncation))
        if self.tail_target is not None and not 0 < self.tail_target < 1:
            raise ValueError("tail_target must lie in (0, 1)")

    @property
    def constant_alpha(self) -> bool:
        return not callable(self.alpha)

    @property
    def n_sticks(self) -> int:
        if self.truncation is not None:
            return self.truncation
        target = DEFAULT_TAIL_TARGET if self.tail_target is None else self.tail_target
        return truncation_for(self.alpha_min, target)

    def alpha_at(self, locs: LocationSet) -> np.ndarray:
        if not callable(self.alpha):
            return np.full(len(locs), self.alpha)
        a = np.array([float(self.alpha(p)) for p in locs.points])
        if np.any(a < self.alpha_min):
            bad = int(np.argmin(a))
            raise ValueError(f"alpha({locs.points[bad].tolist()}) = {a[bad]} is below alpha_min = {self.alpha_min}")
        return a


@dataclass(frozen=True, eq=False)
class TruncatedWeights:
    """Weights ``pi[i, x]`` (sticks by locations) and leftover mass per location."""

    weights: np.ndarray
    tail: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        t = np.asarray(self.tail, dtype=float)
        if w.ndim != 2 or t.shape != (w.shape[1],):
            raise ValueError("weights must be N x L with one tail entry per location")
        if np.any(w < 0) or np.any(t < 0):
            raise ValueError("weights and tail must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "tail", t)

    @property
    def n_sticks(self) -> int:
        return self.weights.shape[0]


def beta_quantile(t, alpha):
    """Quantile function of Beta(1, alpha)."""
    t = np.asarray(t, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any((t < 0) | (t > 1)) or np.any(np.isnan(t)):
        raise ValueError("beta_quantile needs t in [0, 1]")
    if np.any(alpha <= 0):
        raise ValueError("beta_quantile needs alpha > 0")
    with np.errstate(divide="ignore"):
        out = -np.expm1(np.log1p(-t) / alpha)
    return float(out) if out.ndim == 0 else out


def beta_cdf(v, alpha):
    v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
    return -np.expm1(alpha * np.log1p(-v))


def sticks_from_standard(u, alpha) -> np.ndarray:
    """Map standardized Gaussian values to Beta(1, alpha) sticks.

    Uses ``1 - Phi(u) = Phi(-u)`` on the log scale so both tails keep full
    precision.
    """
    u = np.asarray(u, dtype=float)
    return -np.expm1(special.log_ndtr(-u) / alpha)


def gauss_to_stick(field: LatentField, spec: StickSpec) -> np.ndarray:
    alpha = spec.alpha_at(field.locations)
    return sticks_from_standard(standardize(field, spec.kernel), alpha)


def stick_weights(V) -> TruncatedWeights:
    """Columnwise stick-breaking of an ``N x L`` (or length-N) stick matrix."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if np.any((V < 0) | (V > 1)) or np.any(np.isnan(V)):
        raise ValueError("stick values must lie in [0, 1]")
    remaining = np.cumprod(1.0 - V, axis=0)
    before = np.vstack([np.ones((1, V.shape[1])), remaining[:-1]])
    return TruncatedWeights(V * before, remaining[-1].copy())


def expected_tail(alpha: float, n: int) -> float:
    if n < 0:
        raise ValueError("truncation must be nonnegative")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return (alpha / (1.0 + alpha)) ** n


def truncation_for(alpha_min: float, target: float) -> int:
    """Smallest N with expected tail below ``target``, capped at 1000."""
    r = alpha_min / (1.0 + alpha_min)
    n = max(1, math.ceil(math.log(target) / math.log(r)))
    while n > 1 and expected_tail(alpha_min, n - 1) < target:
        n -= 1
    while expected_tail(alpha_min, n) >= target and n < MAX_TRUNCATION:
        n += 1
    return min(n, MAX_TRUNCATION)


def sample_stick_matrix(spec: StickSpec, locs: LocationSet, rng: np.random.Generator, dependent: bool = True) -> np.ndarray:
    """``N x L`` matrix of sticks, one independent latent field per row.

    With ``dependent=False`` each stick is a single Beta(1, alpha) draw shared
    by every location (single-weights variant); this needs constant alpha.
    """
    n = spec.n_sticks
    if dependent:
        u = sample_standardized(spec.kernel, locs, rng, n)
        return sticks_from_standard(u, spec.alpha_at(locs)[None, :])
    if not spec.constant_alpha:
        raise ValueError("location-free sticks require a constant alpha")
    u = rng.standard_normal(n)
    return np.repeat(sticks_from_standard(u, spec.alpha)[:, None], len(locs), axis=1)
