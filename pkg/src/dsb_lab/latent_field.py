"""Gaussian base fields with a squared-exponential covariance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .index_space import LocationSet

JITTER = 1e-10
JITTER_GROWTH = 10.0
JITTER_RETRIES = 4


class FactorizationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CovKernelSpec:
    """Covariance ``sigma0 * exp(-d^2 / tau^2)`` around a constant mean."""

    sigma0: float = 1.0
    tau: float = 1.0
    mean: float = 0.0

    def __post_init__(self):
        for name in ("sigma0", "tau", "mean"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def scale(self) -> float:
        return math.sqrt(self.sigma0)


@dataclass(frozen=True, eq=False)
class LatentField:
    locations: LocationSet
    values: np.ndarray
    seed_tag: object = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.locations),):
            raise ValueError("field values must align with locations")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


def cov_matrix(kernel: CovKernelSpec, locs: LocationSet) -> np.ndarray:
    d = locs.distances
    cov = kernel.sigma0 * np.exp(-(d * d) / (kernel.tau**2))
    # exact symmetry, exact diagonal
    cov = np.triu(cov) + np.triu(cov, 1).T
    np.fill_diagonal(cov, kernel.sigma0)
    return cov


def cholesky_factor(kernel: CovKernelSpec, locs: LocationSet) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of the jittered covariance and the jitter used."""
    return _cholesky_cached(kernel, locs)


@lru_cache(maxsize=256)
def _cholesky_cached(kernel, locs):
    cov = cov_matrix(kernel, locs)
    jitter = JITTER * kernel.sigma0
    for _ in range(JITTER_RETRIES + 1):
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(len(locs)))
        except np.linalg.LinAlgError:
            jitter *= JITTER_GROWTH
            continue
        chol.setflags(write=False)
        return chol, jitter
    eig = np.linalg.eigvalsh(cov)
    cond = eig[-1] / eig[0] if eig[0] > 0 else math.inf
    raise FactorizationError(
        f"covariance not factorizable after {JITTER_RETRIES} jitter escalations "
        f"(final jitter {jitter / JITTER_GROWTH:.3g}, min eigenvalue {eig[0]:.3g}, "
        f"condition number {cond:.3g}, min separation "
        f"{np.min(np.where(np.eye(len(locs), dtype=bool), np.inf, locs.distances)):.3g})"
    )


def sample_standardized(kernel: CovKernelSpec, locs: LocationSet, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent fields ``(Z - mean) / sqrt(sigma0)``, shape ``(size, len(locs))``."""
    chol, _ = cholesky_factor(kernel, locs)
    eps = rng.standard_normal((size, len(locs)))
    return eps @ chol.T / kernel.scale


def sample_field(kernel: CovKernelSpec, locs: LocationSet, rng: np.random.Generator) -> LatentField:
    chol, _ = cholesky_factor(kernel, locs)
    values = kernel.mean + chol @ rng.standard_normal(len(locs))
    tag = getattr(rng.bit_generator, "seed_seq", None)
    tag = None if tag is None else (getattr(tag, "entropy", None), tuple(getattr(tag, "spawn_key", ())))
    return LatentField(locs, values, tag)


def standard_cdf(z):
    """Standard normal c.d.f. (accurate in both tails)."""
    out = special.ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def standardize(field: LatentField, kernel: CovKernelSpec) -> np.ndarray:
    return (field.values - kernel.mean) / kernel.scale
