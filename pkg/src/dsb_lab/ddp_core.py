"""Truncated DDP sample paths and discrete-measure operations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .atom_process import AtomField, AtomSpec, sample_atom_field, sample_iid_atoms
from .index_space import Box, LocationSet, as_point
from .stick_process import StickSpec, TruncatedWeights, sample_stick_matrix, stick_weights

VARIANTS = ("DDP", "wDDP", "thetaDDP")
WEIGHT_TOL = 1e-12
_DYADIC = 2.0**52


class CoverageError(ValueError):
    pass


def _merge(atoms: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum weights of atoms with identical coordinates (first-appearance order)."""
    uniq, first, inv = np.unique(atoms, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    w = np.bincount(inv, weights=weights, minlength=len(uniq))
    order = np.argsort(first, kind="stable")
    return uniq[order], w[order]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[0] != w.shape[0] or w.size == 0:
            raise ValueError("atoms and weights must align and be non-empty")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = math.fsum(w)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, theta) -> "DiscreteMeasure":
        return cls(as_point(theta)[None, :], np.ones(1))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def mass(self, lo, hi) -> float:
        """Mass of the closed box ``[lo, hi]``."""
        inside = np.all((self.atoms >= np.asarray(lo)) & (self.atoms <= np.asarray(hi)), axis=1)
        return float(np.dot(self.weights, inside))


@dataclass(frozen=True, eq=False)
class MeasureField:
    """Per-location truncated measures of one sample path.

    ``weights`` is ``(L, N)`` (renormalized), ``atoms`` is ``(L, N, d)`` and
    ``tail`` keeps the raw pre-renormalization leftover mass per location.
    """

    locations: LocationSet
    weights: np.ndarray
    atoms: np.ndarray
    variant: str
    tail: np.ndarray

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        L = len(self.locations)
        if self.weights.shape[0] != L or self.atoms.shape[:2] != self.weights.shape or self.tail.shape != (L,):
            raise ValueError("measure field arrays are misaligned with the locations")

    def __len__(self) -> int:
        return len(self.locations)

    def measure(self, j: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.atoms[j], self.weights[j])

    @property
    def measures(self) -> list[DiscreteMeasure]:
        return [self.measure(j) for j in range(len(self))]


def _assemble(locs: LocationSet, weights: TruncatedWeights, atoms: AtomField, variant: str) -> MeasureField:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    pi = weights.weights
    if pi.shape != (atoms.n_sticks, atoms.n_locations):
        raise ValueError(
            f"weights are {pi.shape[0]} sticks x {pi.shape[1]} locations but atoms are "
            f"{atoms.n_sticks} x {atoms.n_locations}"
        )
    if pi.shape[1] != len(locs):
        raise ValueError("weights do not match the location set")
    if variant == "wDDP" and not np.all(pi == pi[:, :1]):
        raise ValueError("wDDP requires stick weights that are identical across locations")
    if variant == "thetaDDP" and not np.all(atoms.atoms == atoms.atoms[:, :1, :]):
        raise ValueError("thetaDDP requires atoms that are identical across locations")
    mass = 1.0 - weights.tail
    if np.any(mass <= 0):
        raise ValueError("no stick mass was broken at some location (tail = 1)")
    w = (pi / mass).T
    # absorb the last-bit residual into each column's largest weight
    for row in w:
        k = int(np.argmax(row))
        row[k] += 1.0 - math.fsum(row)
    return MeasureField(locs, np.ascontiguousarray(w), atoms.atoms.transpose(1, 0, 2).copy(), variant, weights.tail.copy())


def assemble_path(weights: TruncatedWeights, atoms: AtomField, variant: str, locations: LocationSet | None = None) -> MeasureField:
    """Pair truncated weights with atoms and renormalize by ``1 / (1 - tail)``.

    Parameters
    ----------
    weights : TruncatedWeights
        ``N x L`` stick-breaking weights.
    atoms : AtomField
        ``N x L`` atoms.
    variant : {"DDP", "wDDP", "thetaDDP"}
        Checked against the structure of the inputs: ``wDDP`` needs weights
        that do not vary over locations, ``thetaDDP`` needs atoms that do not.
    locations : LocationSet, optional
        Index points the columns refer to; a placeholder 1-D set is used when
        omitted.
    """
    if locations is None:
        L = atoms.n_locations
        locations = LocationSet(np.arange(L, dtype=float)[:, None], Box((0.0,), (max(L - 1, 1.0),)))
    return _assemble(locations, weights, atoms, variant)


@dataclass(frozen=True)
class ProcessSpec:
    variant: str = "thetaDDP"
    sticks: StickSpec = StickSpec(truncation=50)
    atoms: AtomSpec = AtomSpec()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "wDDP" and not self.sticks.constant_alpha:
            raise ValueError("wDDP shares weights across locations, so alpha must be constant")

    @property
    def n_sticks(self) -> int:
        return self.sticks.n_sticks


def sample_path(process: ProcessSpec, locs: LocationSet, rng: np.random.Generator) -> MeasureField:
    n = process.n_sticks
    V = sample_stick_matrix(process.sticks, locs, rng, dependent=process.variant != "wDDP")
    if process.variant == "thetaDDP":
        atoms = sample_iid_atoms(process.atoms, n, rng, n_locations=len(locs))
    else:
        atoms = sample_atom_field(process.atoms, locs, n, rng)
    return _assemble(locs, stick_weights(V), atoms, process.variant)


# -- test-function panels ---------------------------------------------------


@dataclass(frozen=True)
class PanelFunction:
    """Bounded continuous function on Theta, vectorized over leading axes."""

    fn: Callable[[np.ndarray], np.ndarray]
    bound: float
    lipschitz: float
    name: str = ""
    constant: float | None = None

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.constant is not None:
            return np.full(theta.shape[:-1], self.constant)
        return self.fn(theta)


def bump(coord: int, center: float, width: float) -> PanelFunction:
    return PanelFunction(
        lambda t: np.exp(-((t[..., coord] - center) ** 2) / width**2),
        1.0,
        math.sqrt(2.0) * math.exp(-0.5) / width,
        f"bump[{coord}]({center:.4g},{width:.4g})",
    )


def cosine(coord: int, k: int) -> PanelFunction:
    return PanelFunction(lambda t: np.cos(k * t[..., coord]), 1.0, float(k), f"cos[{coord}]({k})")


def constant(c: float) -> PanelFunction:
    if abs(c) > 1:
        raise ValueError("panel members must be bounded by 1")
    return PanelFunction(lambda t: np.full(t.shape[:-1], c), abs(c), 0.0, f"const({c})", constant=float(c))


@dataclass(frozen=True)
class TestFunctionPanel:
    members: tuple

    __test__ = False  # not a pytest class

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a test-function panel needs at least one member")
        if any(m.bound > 1.0 for m in members):
            raise ValueError("panel members must be bounded by 1")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def evaluate(self, theta) -> np.ndarray:
        """Member values at ``theta`` of shape ``(..., d)``; returns ``(..., F)``."""
        return np.stack([m(theta) for m in self.members], axis=-1)

    @classmethod
    def default(cls, lo, hi, n_bumps: int = 5, cosines: bool = True) -> "TestFunctionPanel":
        """Gaussian bumps on each coordinate (centers spread over [lo, hi], width a quarter of the side) plus cos(k theta_j), k = 1, 2."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        members = []
        for j, (a, b) in enumerate(zip(lo, hi)):
            width = (b - a) / 4.0
            for c in np.linspace(a, b, n_bumps):
                members.append(bump(j, float(c), width))
        if cosines:
            for j in range(len(lo)):
                members.extend(cosine(j, k) for k in (1, 2))
        return cls(tuple(members))

    @classmethod
    def for_atoms(cls, spec: AtomSpec, **kw) -> "TestFunctionPanel":
        lo, hi = spec.box()
        return cls.default(lo, hi, **kw)


def integrate(m: DiscreteMeasure, f: PanelFunction) -> float:
    if f.constant is not None:
        return f.constant
    return float(np.dot(m.weights, f(m.atoms)))


def panel_integrals(m: DiscreteMeasure, panel: TestFunctionPanel) -> np.ndarray:
    return np.array([integrate(m, f) for f in panel.members])


def tv_distance(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    """Total variation norm of ``m1 - m2`` (range [0, 2]); atoms are merged on exact equality."""
    if m1.dim != m2.dim:
        raise ValueError("measures live on spaces of different dimension")
    atoms = np.vstack([m1.atoms, m2.atoms])
    signed = np.concatenate([m1.weights, -m2.weights])
    _, w = _merge(atoms, signed)
    return float(min(2.0, np.sum(np.abs(w))))


def weak_panel_distance(m1: DiscreteMeasure, m2: DiscreteMeasure, panel: TestFunctionPanel) -> float:
    return float(np.max(np.abs(panel_integrals(m1, panel) - panel_integrals(m2, panel))))


# -- partition-of-unity interpolation -----------------------------------------


def partition_weights(nodes: LocationSet, r: float, query) -> np.ndarray:
    """Normalized hat weights ``max(0, 1 - d(x, x_k)/r)`` of ``query`` over ``nodes``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    q = as_point(query)
    if q.size != nodes.dim:
        raise ValueError("query dimension does not match the nodes")
    d = np.sqrt(np.sum((nodes.points - q) ** 2, axis=1))
    raw = np.maximum(0.0, 1.0 - d / r)
    total = math.fsum(raw)
    if total <= 0:
        raise CoverageError(f"no node lies within r = {r} of {q.tolist()} (nearest at {d.min():.4g})")
    # multiples of 2**-52 add without rounding, so the weights sum to exactly 1
    phi = np.round(raw / total * _DYADIC) / _DYADIC
    k = int(np.argmax(phi))
    phi[k] = 0.0
    phi[k] = 1.0 - np.sum(phi)
    return phi


def interpolate_measure_field(nodes: LocationSet, node_measures: Sequence[DiscreteMeasure], r: float, query) -> DiscreteMeasure:
    if len(node_measures) != len(nodes):
        raise ValueError("one measure per node is required")
    phi = partition_weights(nodes, r, query)
    active = np.flatnonzero(phi > 0)
    atoms = np.vstack([node_measures[k].atoms for k in active])
    w = np.concatenate([phi[k] * node_measures[k].weights for k in active])
    atoms, w = _merge(atoms, w)
    k = int(np.argmax(w))
    w[k] += 1.0 - math.fsum(w)
    return DiscreteMeasure(atoms, w)


# -- path dump ---------------------------------------------------------------


def path_table(mf: MeasureField) -> tuple[list[str], list[list]]:
    """Header and rows of the path dump: one row per (location, atom)."""
    p = mf.locations.dim
    d = mf.atoms.shape[2]
    header = ["loc_index"] + [f"x{k}" for k in range(p)] + [f"theta{k}" for k in range(d)] + ["weight"]
    rows = []
    for j, x in enumerate(mf.locations.points):
        for i in range(mf.weights.shape[1]):
            rows.append([j, *x.tolist(), *mf.atoms[j, i].tolist(), float(mf.weights[j, i])])
    return header, rows
