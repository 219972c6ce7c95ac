"""Index spaces: axis-aligned boxes in R^p with the Euclidean metric."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

DUPLICATE_TOL = 1e-12


def as_point(x) -> np.ndarray:
    """Coerce a scalar or sequence into a finite 1-D coordinate vector."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1 or p.size == 0:
        raise ValueError("index point must be a non-empty coordinate vector")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"index point has non-finite coordinates: {p}")
    return p


def distance(a, b) -> float:
    a = as_point(a)
    b = as_point(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi):
            raise ValueError("box bounds differ in dimension")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("box bounds must be finite")
        if any(l >= h for l, h in zip(lo, hi)):
            raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, p, tol: float = 1e-12) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.asarray(self.lo) - tol) and np.all(p <= np.asarray(self.hi) + tol))


@dataclass(frozen=True, eq=False)
class LocationSet:
    """Ordered, duplicate-free set of index points inside a box.

    ``points`` is stored as a read-only ``(n, p)`` array.
    """

    points: np.ndarray
    domain: Box
    _dist: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a location set needs at least one point")
        if pts.shape[1] != self.domain.dim:
            raise ValueError(f"points have dimension {pts.shape[1]}, domain has {self.domain.dim}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("location coordinates must be finite")
        for k, p in enumerate(pts):
            if not self.domain.contains(p):
                raise ValueError(f"point {k} = {p.tolist()} lies outside the domain box")
        dist = pairwise_distances(pts)
        off = np.where(np.eye(len(pts), dtype=bool), np.inf, dist)
        if np.any(off < DUPLICATE_TOL):
            i, j = np.argwhere(off < DUPLICATE_TOL)[0]
            raise ValueError(f"duplicate locations {i} and {j} (closer than {DUPLICATE_TOL})")
        pts.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_dist", dist)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LocationSet)
            and self.domain == other.domain
            and self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
        )

    def __hash__(self) -> int:
        return hash((self.domain, self.points.shape, self.points.tobytes()))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def distances(self) -> np.ndarray:
        return self._dist

    def index_of(self, x) -> int:
        x = as_point(x)
        hits = np.flatnonzero(np.sqrt(np.sum((self.points - x) ** 2, axis=1)) < DUPLICATE_TOL)
        if hits.size == 0:
            raise KeyError(f"{x.tolist()} is not in the location set")
        return int(hits[0])


def build_grid(domain: Box, resolution) -> LocationSet:
    """Uniform tensor lattice on ``domain``.

    ``resolution`` is an int (shared by all axes) or one int per axis.  An
    axis with resolution 1 contributes only its lower endpoint.  The last
    axis varies fastest.
    """
    res = np.broadcast_to(np.atleast_1d(np.asarray(resolution)), (domain.dim,))
    if np.any(res < 1) or np.any(res != np.floor(res)):
        raise ValueError(f"resolution must be a positive integer per axis, got {resolution}")
    axes = []
    for lo, hi, r in zip(domain.lo, domain.hi, res):
        r = int(r)
        axes.append(np.array([lo]) if r == 1 else np.linspace(lo, hi, r))
    pts = np.array(list(itertools.product(*axes)), dtype=float)
    return LocationSet(pts, domain)


def ladder_locations(x0, ladder, direction=None, domain: Box | None = None):
    """Locations ``x0 + d * direction`` for each distance ``d`` of a ladder.

    Returns the location set (``x0`` first) and, for every ladder entry, the
    index of its point.  A zero distance maps onto ``x0`` itself.
    """
    x0 = as_point(x0)
    ladder = [float(d) for d in ladder]
    if any(d < 0 for d in ladder):
        raise ValueError("ladder distances must be nonnegative")
    if direction is None:
        direction = np.zeros_like(x0)
        direction[0] = 1.0
    direction = as_point(direction)
    norm = np.sqrt(np.sum(direction**2))
    if direction.shape != x0.shape or norm == 0:
        raise ValueError("ladder direction must be a nonzero vector of the index dimension")
    direction = direction / norm

    pts = [x0]
    index = []
    for d in ladder:
        if d == 0:
            index.append(0)
            continue
        pts.append(x0 + d * direction)
        index.append(len(pts) - 1)
    pts = np.array(pts)
    if domain is None:
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        domain = Box(tuple(lo), tuple(hi))
    return LocationSet(pts, domain), index
