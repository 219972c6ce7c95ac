"""Monte Carlo probes for DDP sample paths and their induced mixtures.

Each probe runs ``n`` replicates, every replicate drawing from its own stream
keyed by ``(seed, probe name, replicate index)``, and reduces the per-replicate
values in index order.  Reports carry estimates with Monte Carlo standard
errors plus verdicts against the tolerances the caller declared.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import streams
from .ddp_core import ProcessSpec, TestFunctionPanel, MeasureField, sample_path
from .index_space import LocationSet, ladder_locations
from .mixture import (
    COVERAGE_MIN,
    CoverageError,
    DensityGrid,
    MixtureKernelSpec,
    SupportError,
    check_decay_condition,
    kl_divergence,
    mixture_density_batch,
)
from .stick_process import beta_cdf, sample_stick_matrix

MIN_REPLICATES = 100
MIN_KS_REPLICATES = 1000
# sd of the limiting Kolmogorov distribution; the KS statistic scales as K / sqrt(n)
KOLMOGOROV_SD = math.sqrt(math.pi**2 / 12.0 - (math.pi / 2.0) * math.log(2.0) ** 2)


class ProbeError(RuntimeError):
    pass


class DecayConditionError(ProbeError):
    pass


@dataclass(frozen=True)
class ProbeConfig:
    process: ProcessSpec
    n: int = 2000
    seed: int = 0
    panel: TestFunctionPanel | None = None
    se_factor: float = 2.0
    level: float = 0.01
    ladder: tuple = ()
    epsilon: tuple = ()
    # worker count does not change results, so it is kept out of equality and digests
    threads: int | None = field(default=None, compare=False)

    def __post_init__(self):
        streams.check_seed(self.seed)
        if int(self.n) != self.n or self.n < MIN_REPLICATES:
            raise ValueError(f"replicate count n must be an integer >= {MIN_REPLICATES}, got {self.n}")
        ladder = tuple(float(d) for d in self.ladder)
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError(f"ladder must be strictly decreasing, got {ladder}")
        eps = tuple(float(e) for e in np.atleast_1d(self.epsilon)) if np.size(self.epsilon) else ()
        if any(not e > 0 for e in eps):
            raise ValueError("epsilon values must be positive")
        object.__setattr__(self, "ladder", ladder)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "n", int(self.n))

    def test_panel(self) -> TestFunctionPanel:
        return self.panel if self.panel is not None else TestFunctionPanel.for_atoms(self.process.atoms)


# -- reports --------------------------------------------------------------------


@dataclass
class Row:
    label: str
    estimate: float
    stderr: float
    n: int


@dataclass
class Verdict:
    check: str
    tolerance: float
    passed: bool | None
    status: str = ""

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"


@dataclass
class DiagnosticsReport:
    probe: str
    rows: list
    verdicts: list
    seed: int
    config_digest: str
    runtime_seconds: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        states = {v.status for v in self.verdicts}
        if "fail" in states:
            return "fail"
        if "inconclusive" in states:
            return "inconclusive"
        return "pass"

    def estimates(self) -> np.ndarray:
        return np.array([r.estimate for r in self.rows])

    def stderrs(self) -> np.ndarray:
        return np.array([r.stderr for r in self.rows])

    def to_dict(self, include_runtime: bool = True) -> dict:
        return {
            "probe": self.probe,
            "config_digest": self.config_digest,
            "rows": [{"label": r.label, "estimate": r.estimate, "stderr": r.stderr, "n": r.n} for r in self.rows],
            "verdicts": [
                {"check": v.check, "tolerance": v.tolerance, "pass": v.passed, "status": v.status} for v in self.verdicts
            ],
            "seed": self.seed,
            "runtime_seconds": self.runtime_seconds if include_runtime else None,
            "status": self.status,
            "details": _jsonable(self.details),
        }

    def to_json(self, include_runtime: bool = True) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=False, allow_nan=True) + "\n"

    def csv_rows(self) -> tuple[list[str], list[list]]:
        header = ["probe", "label", "estimate", "stderr", "n"]
        return header, [[self.probe, r.label, r.estimate, r.stderr, r.n] for r in self.rows]

    def to_text(self) -> str:
        lines = [f"probe {self.probe}  (seed {self.seed}, digest {self.config_digest[:12]})"]
        width = max([len(r.label) for r in self.rows] + [5])
        for r in self.rows:
            lines.append(f"  {r.label:<{width}}  {r.estimate: .6g}  +/- {r.stderr:.3g}  (n={r.n})")
        for v in self.verdicts:
            lines.append(f"  [{v.status.upper():>12}] {v.check} (tolerance {v.tolerance:g})")
        lines.append(f"  status: {self.status}")
        return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def describe(obj):
    """JSON-compatible structural description of a config object."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"type": type(obj).__name__}
        for f in dataclasses.fields(obj):
            if f.compare:
                out[f.name] = describe(getattr(obj, f.name))
        return out
    if isinstance(obj, LocationSet):
        return {"points": obj.points.tolist(), "domain": describe(obj.domain)}
    if isinstance(obj, DensityGrid):
        return {"kind": obj.kind, "lo": obj.lo, "hi": obj.hi, "nodes": len(obj)}
    if isinstance(obj, np.ndarray):
        return hashlib.sha256(np.ascontiguousarray(obj).tobytes()).hexdigest()
    if isinstance(obj, (list, tuple)):
        return [describe(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): describe(v) for k, v in obj.items()}
    if callable(obj):
        return getattr(obj, "__qualname__", repr(obj))
    return _jsonable(obj)


def digest(*parts) -> str:
    text = json.dumps([describe(p) for p in parts], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- shared machinery -------------------------------------------------------------


def _run(cfg: ProbeConfig, name: str, fn) -> np.ndarray:
    """Per-replicate values stacked in replicate order."""

    def one(i):
        return fn(streams.replicate_stream(cfg.seed, name, i))

    return np.asarray(streams.map_replicates(one, cfg.n, cfg.threads), dtype=float)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.shape[0]
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def panel_integrals(weights: np.ndarray, atoms: np.ndarray, panel: TestFunctionPanel) -> np.ndarray:
    """``(L, F)`` integrals of every panel member against every location's measure."""
    out = np.empty((weights.shape[0], len(panel)))
    for k, f in enumerate(panel.members):
        if f.constant is not None:
            out[:, k] = f.constant
        else:
            out[:, k] = np.einsum("ln,ln->l", weights, f(atoms))
    return out


def _ladder_label(d: float) -> str:
    return f"d={d:g}"


def _monotone_verdict(diffs: np.ndarray, labels, se_factor: float, direction: str, what: str) -> tuple[Verdict, list]:
    """Paired check that consecutive ladder estimates move in ``direction`` within ``se_factor`` s.e."""
    steps = []
    ok = True
    for k in range(diffs.shape[1]):
        m, se = _mean_se(diffs[:, k])
        good = m <= se_factor * se if direction == "nonincreasing" else m >= -se_factor * se
        ok &= bool(good)
        steps.append({"from": labels[k], "to": labels[k + 1], "change": m, "stderr": se, "ok": bool(good)})
    return Verdict(f"{what} {direction} along the ladder within {se_factor:g} paired s.e.", se_factor, ok), steps


def _finish(report: DiagnosticsReport, t0: float) -> DiagnosticsReport:
    report.runtime_seconds = time.perf_counter() - t0
    return report


# -- probes -----------------------------------------------------------------------


def marginal_beta_probe(cfg: ProbeConfig, locations: LocationSet, test_alpha: float | None = None) -> DiagnosticsReport:
    """KS test of the first stick ``V_{1,x}`` against Beta(1, alpha(x)) at each location.

    ``test_alpha`` replaces the model's alpha in the null law (used to check
    the test's power against a deliberately wrong null).
    """
    t0 = time.perf_counter()
    if cfg.n < MIN_KS_REPLICATES:
        raise ValueError(f"the KS probe needs n >= {MIN_KS_REPLICATES} (asymptotic p-values), got {cfg.n}")
    sticks = dataclasses.replace(cfg.process.sticks, truncation=1, tail_target=None)
    dependent = cfg.process.variant != "wDDP"
    V = _run(cfg, "marginal_beta", lambda rng: sample_stick_matrix(sticks, locations, rng, dependent)[0])
    alphas = np.full(len(locations), float(test_alpha)) if test_alpha is not None else sticks.alpha_at(locations)

    rows, verdicts, pvals = [], [], []
    for j, x in enumerate(locations.points):
        a = alphas[j]
        res = stats.kstest(V[:, j], lambda v, a=a: beta_cdf(v, a), method="asymp")
        label = f"x={x.tolist()}"
        rows.append(Row(label, float(res.statistic), KOLMOGOROV_SD / math.sqrt(cfg.n), cfg.n))
        pvals.append(float(res.pvalue))
        verdicts.append(Verdict(f"KS p-value > level vs Beta(1, {a:g}) at {label}", cfg.level, bool(res.pvalue > cfg.level)))
    report = DiagnosticsReport(
        "marginal_beta", rows, verdicts, cfg.seed, digest("marginal_beta", cfg, locations, test_alpha),
        details={"p_values": pvals, "alphas": alphas.tolist()},
    )
    return _finish(report, t0)


def continuity_modulus_probe(cfg: ProbeConfig, x0, ladder=None, direction=None, final_ratio: float | None = None) -> DiagnosticsReport:
    """Mean weak-panel distance between ``G_x`` and ``G_x0`` along a distance ladder."""
    t0 = time.perf_counter()
    ladder = tuple(cfg.ladder if ladder is None else ladder)
    _check_ladder(ladder)
    locs, idx = ladder_locations(x0, ladder, direction)
    panel = cfg.test_panel()
    process = cfg.process

    def rep(rng):
        path = sample_path(process, locs, rng)
        I = panel_integrals(path.weights, path.atoms, panel)
        return np.max(np.abs(I[idx] - I[0]), axis=1)

    D = _run(cfg, "continuity_modulus", rep)
    labels = [_ladder_label(d) for d in ladder]
    rows = [Row(lab, *_mean_se(D[:, k]), cfg.n) for k, lab in enumerate(labels)]
    verdict, steps = _monotone_verdict(np.diff(D, axis=1), labels, cfg.se_factor, "nonincreasing", "weak-panel distance")
    verdicts = [verdict]
    if final_ratio is not None and len(rows) >= 2:
        ratio = rows[-1].estimate / rows[0].estimate if rows[0].estimate > 0 else math.inf
        verdicts.append(Verdict(f"final/first estimate ratio {ratio:.4g} < tolerance", final_ratio, bool(ratio < final_ratio)))
    report = DiagnosticsReport(
        "continuity_modulus", rows, verdicts, cfg.seed,
        digest("continuity_modulus", cfg, np.asarray(x0, dtype=float), ladder, direction, final_ratio),
        details={"variant": process.variant, "steps": steps, "panel_size": len(panel)},
    )
    return _finish(report, t0)


def _tv_column(cfg: ProbeConfig, locs: LocationSet, idx) -> np.ndarray:
    from .ddp_core import tv_distance

    process = cfg.process

    def rep(rng):
        path = sample_path(process, locs, rng)
        base = path.measure(0)
        return np.array([0.0 if k == 0 else tv_distance(path.measure(k), base) for k in idx] + [float(np.max(path.tail))])

    return _run(cfg, f"tv_contrast:{process.variant}", rep)


def tv_contrast_probe(
    theta_cfg: ProbeConfig,
    contrast_cfgs: Sequence[ProbeConfig],
    x0,
    ladder=None,
    direction=None,
    theta_final_max: float | None = 0.2,
    contrast_floor: float = 1.9,
) -> DiagnosticsReport:
    """Paired TV moduli: a thetaDDP column that should shrink and DDP/wDDP columns that should not."""
    t0 = time.perf_counter()
    if theta_cfg.process.variant != "thetaDDP":
        raise ValueError("the first configuration must be a thetaDDP")
    if isinstance(contrast_cfgs, ProbeConfig):
        contrast_cfgs = [contrast_cfgs]
    ladder = tuple(theta_cfg.ladder if ladder is None else ladder)
    _check_ladder(ladder)
    locs, idx = ladder_locations(x0, ladder, direction)
    labels = [_ladder_label(d) for d in ladder]

    rows, verdicts, details = [], [], {"max_tail": {}}
    T = _tv_column(theta_cfg, locs, idx)
    details["max_tail"]["thetaDDP"] = float(np.mean(T[:, -1]))
    T = T[:, :-1]
    rows += [Row(f"thetaDDP {lab}", *_mean_se(T[:, k]), theta_cfg.n) for k, lab in enumerate(labels)]
    v, steps = _monotone_verdict(np.diff(T, axis=1), labels, theta_cfg.se_factor, "nonincreasing", "thetaDDP TV")
    verdicts.append(v)
    details["theta_steps"] = steps
    positive = [k for k, d in enumerate(ladder) if d > 0]
    if theta_final_max is not None and positive:
        k = positive[-1]
        est = float(np.mean(T[:, k]))
        verdicts.append(Verdict(f"thetaDDP TV at {labels[k]} ({est:.4g}) below tolerance", theta_final_max, est < theta_final_max))

    for cfg in contrast_cfgs:
        name = cfg.process.variant
        C = _tv_column(cfg, locs, idx)
        details["max_tail"][name] = float(np.mean(C[:, -1]))
        C = C[:, :-1]
        rows += [Row(f"{name} {lab}", *_mean_se(C[:, k]), cfg.n) for k, lab in enumerate(labels)]
        low = min((float(np.mean(C[:, k])) for k in positive), default=math.inf)
        verdicts.append(Verdict(f"{name} TV stays >= floor at every positive distance (min {low:.4g})", contrast_floor, low >= contrast_floor))

    report = DiagnosticsReport(
        "tv_contrast", rows, verdicts, theta_cfg.seed,
        digest("tv_contrast", theta_cfg, list(contrast_cfgs), np.asarray(x0, dtype=float), ladder, direction, theta_final_max, contrast_floor),
        details=details,
    )
    return _finish(report, t0)


def _loo_corr(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Pearson correlation and its leave-one-out versions."""
    n = a.shape[0]
    a = a - a.mean()
    b = b - b.mean()
    sa, sb = a.sum(), b.sum()
    saa, sbb, sab = (a * a).sum(), (b * b).sum(), (a * b).sum()
    full = sab / math.sqrt(saa * sbb)
    m = n - 1
    la, lb = sa - a, sb - b
    caa = (saa - a * a) - la * la / m
    cbb = (sbb - b * b) - lb * lb / m
    cab = (sab - a * b) - la * lb / m
    with np.errstate(invalid="ignore", divide="ignore"):
        loo = cab / np.sqrt(caa * cbb)
    return float(full), loo


def _jackknife_se(loo: np.ndarray) -> float:
    n = loo.shape[0]
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def association_probe(
    cfg: ProbeConfig,
    box_lo,
    box_hi,
    x0,
    ladder=None,
    far: float | None = None,
    direction=None,
    far_factor: float = 3.0,
) -> DiagnosticsReport:
    """Pearson correlation of ``G_x(B)`` and ``G_x0(B)`` along a ladder (jackknife s.e.).

    ``far`` adds one distant pair whose correlation should vanish; decorrelation
    at large distances needs both sticks and atoms to vary with x (DDP).
    """
    t0 = time.perf_counter()
    ladder = tuple(cfg.ladder if ladder is None else ladder)
    _check_ladder(ladder)
    dists = list(ladder) + ([float(far)] if far is not None else [])
    locs, idx = ladder_locations(x0, dists, direction)
    lo = np.atleast_1d(np.asarray(box_lo, dtype=float))
    hi = np.atleast_1d(np.asarray(box_hi, dtype=float))
    box_name = f"B=[{lo.tolist()}, {hi.tolist()}]"
    process = cfg.process

    def rep(rng):
        path = sample_path(process, locs, rng)
        inside = np.all((path.atoms >= lo) & (path.atoms <= hi), axis=2)
        return np.einsum("ln,ln->l", path.weights, inside)

    M = _run(cfg, "association", rep)
    var = np.var(M, axis=0)
    # masses carry ~1e-16 rounding from renormalization, so "constant" means tiny variance
    if np.any(var[[0] + [k for k in idx]] <= 1e-20):
        raise ProbeError(f"G_x({box_name}) has zero variance; choose a box with nonzero, non-full mass")

    est, loos = [], []
    for k in idx:
        if k == 0:
            est.append(1.0)
            loos.append(np.ones(cfg.n))
        else:
            r, loo = _loo_corr(M[:, k], M[:, 0])
            est.append(r)
            loos.append(loo)
    labels = [_ladder_label(d) for d in dists]
    rows = [Row(lab, est[k], _jackknife_se(loos[k]), cfg.n) for k, lab in enumerate(labels)]

    verdicts, steps = [], []
    n_ladder = len(ladder)
    ok = True
    for k in range(n_ladder - 1):
        change = est[k + 1] - est[k]
        se = _jackknife_se(loos[k + 1] - loos[k])
        good = change > -cfg.se_factor * se
        ok &= bool(good)
        steps.append({"from": labels[k], "to": labels[k + 1], "change": change, "stderr": se, "ok": bool(good)})
    verdicts.append(Verdict(f"correlation increases toward 1 as the distance halves, within {cfg.se_factor:g} s.e.", cfg.se_factor, ok))
    if 0.0 in ladder:
        k = ladder.index(0.0)
        verdicts.append(Verdict("correlation is exactly 1 at zero distance", 0.0, est[k] == 1.0))
    if far is not None:
        r, se = est[-1], rows[-1].stderr
        verdicts.append(Verdict(f"|correlation| at d={far:g} ({r:.4g}) within {far_factor:g} s.e. ({se:.3g}) of 0", far_factor, abs(r) < far_factor * se))

    report = DiagnosticsReport(
        "association", rows, verdicts, cfg.seed,
        digest("association", cfg, lo, hi, np.asarray(x0, dtype=float), ladder, far, direction, far_factor),
        details={"box": box_name, "steps": steps, "variant": process.variant,
                 "mean_mass": np.mean(M, axis=0)[[0] + list(idx)].tolist()},
    )
    return _finish(report, t0)


def _binomial_rows(label: str, hits: int, n: int, level: float = 0.95):
    ci = stats.binomtest(hits, n).proportion_ci(confidence_level=level, method="exact")
    p = hits / n
    row = Row(label, p, math.sqrt(p * (1 - p) / n), n)
    return row, (float(ci.low), float(ci.high))


def _support_verdicts(dist: np.ndarray, epsilons, n: int, label_fmt: str, what: str):
    rows, verdicts, cis = [], [], {}
    for eps in epsilons:
        hits = int(np.sum(dist < eps))
        row, ci = _binomial_rows(label_fmt.format(eps=eps), hits, n)
        rows.append(row)
        cis[row.label] = {"hits": hits, "ci95": list(ci)}
        if ci[0] > 0:
            verdicts.append(Verdict(f"{what} < {eps:g}: support evidence ({hits}/{n} hits, 95% CI lower bound {ci[0]:.3g} > 0)", eps, True))
        else:
            finite = dist[np.isfinite(dist)]
            smallest = float(finite.min()) if finite.size else math.inf
            verdicts.append(Verdict(
                f"{what} < {eps:g}: inconclusive, no hits (smallest observed {smallest:.4g})", eps, None, "inconclusive"))
    return rows, verdicts, cis


def frozen_path(cfg: ProbeConfig, locations: LocationSet, probe: str) -> MeasureField:
    """Sample path used as a default support target, on its own stream."""
    return sample_path(cfg.process, locations, streams.target_stream(cfg.seed, probe))


def support_probe(cfg: ProbeConfig, locations: LocationSet, epsilon=None, target: MeasureField | None = None) -> DiagnosticsReport:
    """Frequency of sample paths within ``epsilon`` of a target field, uniformly over ``locations``, in weak-panel distance."""
    t0 = time.perf_counter()
    epsilons = _epsilons(cfg, epsilon)
    panel = cfg.test_panel()
    if target is None:
        target = frozen_path(cfg, locations, "support")
    if len(target) != len(locations):
        raise ValueError("target field must be given on the probe locations")
    I0 = panel_integrals(target.weights, target.atoms, panel)
    process = cfg.process

    def rep(rng):
        path = sample_path(process, locations, rng)
        return np.max(np.abs(panel_integrals(path.weights, path.atoms, panel) - I0))

    dist = _run(cfg, "support", rep)
    rows, verdicts, cis = _support_verdicts(dist, epsilons, cfg.n, "eps={eps:g}", "max weak-panel distance")
    report = DiagnosticsReport(
        "support", rows, verdicts, cfg.seed,
        digest("support", cfg, locations, epsilons, None if target is None else (target.weights, target.atoms)),
        details={"intervals": cis, "min_distance": float(dist.min()), "median_distance": float(np.median(dist))},
    )
    return _finish(report, t0)


def _decay_gate(kernel: MixtureKernelSpec, gammas, epsilon: float = 0.01):
    y0 = 0.5 * (kernel.y_lo + kernel.y_hi)
    reports = []
    for g in (gammas if kernel.uses_gamma else [None]):
        rep = check_decay_condition(kernel, y0, g, epsilon)
        reports.append(rep)
        if not rep.passed:
            raise DecayConditionError(
                f"{kernel.family} kernel fails the decay condition near y0={y0:g}, gamma0={g}: psi does not "
                f"tend to zero at infinity in theta (sup profile {rep.profile}); mixture continuity is not guaranteed"
            )
    return reports


def _normalization(dens: np.ndarray, grid: DensityGrid) -> float:
    mass = grid.integral(dens)
    if np.any(mass < COVERAGE_MIN):
        raise CoverageError(f"grid [{grid.lo}, {grid.hi}] captures only {float(np.min(mass)):.6f} of a mixture's mass")
    return float(np.max(np.abs(mass - 1.0)))


def kl_support_probe(
    cfg: ProbeConfig,
    kernel: MixtureKernelSpec,
    gammas,
    locations: LocationSet,
    epsilon=None,
    target: np.ndarray | None = None,
    grid: DensityGrid | None = None,
) -> DiagnosticsReport:
    """Frequency of ``sup_{gamma, x} KL(q0 || rho^G) < epsilon`` over replicates.

    ``target`` is a ``(len(gammas), len(locations), nodes)`` array of strictly
    positive densities; by default the mixture densities of a frozen path.
    """
    t0 = time.perf_counter()
    gammas = [float(g) for g in np.atleast_1d(gammas)]
    epsilons = _epsilons(cfg, epsilon)
    _decay_gate(kernel, gammas)
    grid = kernel.grid() if grid is None else grid
    if target is None:
        path = frozen_path(cfg, locations, "kl_support")
        target = mixture_density_batch(path.weights, path.atoms, kernel, gammas, grid)
    target = np.asarray(target, dtype=float)
    if target.shape != (len(gammas), len(locations), len(grid)):
        raise ValueError(f"target must have shape {(len(gammas), len(locations), len(grid))}, got {target.shape}")
    if not np.all(target > 0):
        raise ValueError("target densities must be strictly positive on the grid")
    process = cfg.process

    def rep(rng):
        path = sample_path(process, locations, rng)
        dens = mixture_density_batch(path.weights, path.atoms, kernel, gammas, grid)
        worst = 0.0
        for g in range(len(gammas)):
            for j in range(len(locations)):
                try:
                    worst = max(worst, kl_divergence(target[g, j], dens[g, j], grid))
                except SupportError:
                    return math.inf
        return worst

    sup_kl = _run(cfg, "kl_support", rep)
    rows, verdicts, cis = _support_verdicts(sup_kl, epsilons, cfg.n, "eps={eps:g}", "sup KL(q0 || rho)")
    finite = sup_kl[np.isfinite(sup_kl)]
    summary = {
        "infinite": int(np.sum(~np.isfinite(sup_kl))),
        "quantiles": dict(zip(["min", "q10", "median", "q90", "max"],
                              np.quantile(finite, [0, 0.1, 0.5, 0.9, 1]).tolist())) if finite.size else {},
    }
    report = DiagnosticsReport(
        "kl_support", rows, verdicts, cfg.seed,
        digest("kl_support", cfg, kernel, gammas, locations, epsilons, target, grid),
        details={"intervals": cis, "sup_kl": summary},
    )
    return _finish(report, t0)


def mixture_tv_modulus_probe(
    cfg: ProbeConfig,
    kernel: MixtureKernelSpec,
    gamma0: float,
    x0,
    ladder=None,
    axis: str = "x",
    direction=None,
    grid: DensityGrid | None = None,
    normalization_tol: float = 1e-6,
) -> DiagnosticsReport:
    """Mean L1 distance between mixture densities at ``(gamma, x)`` and ``(gamma0, x0)``.

    ``axis="x"`` moves the index point at fixed ``gamma0``; ``axis="gamma"``
    moves ``gamma = gamma0 + d`` at fixed ``x0``.
    """
    t0 = time.perf_counter()
    if axis not in ("x", "gamma"):
        raise ValueError("axis must be 'x' or 'gamma'")
    ladder = tuple(cfg.ladder if ladder is None else ladder)
    _check_ladder(ladder)
    grid = kernel.grid() if grid is None else grid
    if axis == "x":
        locs, idx = ladder_locations(x0, ladder, direction)
        gammas = [float(gamma0)]
    else:
        locs, _ = ladder_locations(x0, [], direction)
        gammas = [float(gamma0)] + [float(gamma0) + d for d in ladder if d > 0]
        pos = iter(range(1, len(gammas)))
        idx = [0 if d == 0 else next(pos) for d in ladder]
    _decay_gate(kernel, sorted(set(gammas)))
    process = cfg.process
    h = grid.weights

    def rep(rng):
        path = sample_path(process, locs, rng)
        dens = mixture_density_batch(path.weights, path.atoms, kernel, gammas, grid)
        norm_err = _normalization(dens, grid)
        flat = dens[0] if axis == "x" else dens[:, 0]
        return np.array([np.abs(flat[k] - flat[0]) @ h for k in idx] + [norm_err])

    D = _run(cfg, f"mixture_tv_modulus:{axis}", rep)
    norm_err = float(np.max(D[:, -1]))
    D = D[:, :-1]
    labels = [_ladder_label(d) for d in ladder]
    rows = [Row(lab, *_mean_se(D[:, k]), cfg.n) for k, lab in enumerate(labels)]
    v, steps = _monotone_verdict(np.diff(D, axis=1), labels, cfg.se_factor, "nonincreasing", "mixture L1 distance")
    verdicts = [
        v,
        Verdict(f"every evaluated density integrates to 1 (max error {norm_err:.3g})", normalization_tol, norm_err <= normalization_tol),
    ]
    report = DiagnosticsReport(
        "mixture_tv_modulus", rows, verdicts, cfg.seed,
        digest("mixture_tv_modulus", cfg, kernel, gamma0, np.asarray(x0, dtype=float), ladder, axis, direction, grid, normalization_tol),
        details={"axis": axis, "variant": process.variant, "steps": steps, "max_normalization_error": norm_err},
    )
    return _finish(report, t0)


def _check_ladder(ladder):
    if not ladder:
        raise ValueError("a non-empty distance ladder is required")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError(f"ladder must be strictly decreasing, got {ladder}")
    if any(d < 0 for d in ladder):
        raise ValueError("ladder distances must be nonnegative")


def _epsilons(cfg: ProbeConfig, epsilon):
    eps = cfg.epsilon if epsilon is None else tuple(float(e) for e in np.atleast_1d(epsilon))
    if not eps:
        raise ValueError("at least one epsilon is required")
    if any(e < 0 for e in eps):
        raise ValueError("epsilon must be nonnegative")
    return eps
