import json
import math

import numpy as np
import pytest

from dsb_lab.atom_process import AtomSpec, Marginal
from dsb_lab.ddp_core import ProcessSpec, TestFunctionPanel, constant
from dsb_lab.diagnostics import (
    DecayConditionError,
    DiagnosticsReport,
    ProbeConfig,
    ProbeError,
    Row,
    Verdict,
    association_probe,
    continuity_modulus_probe,
    kl_support_probe,
    marginal_beta_probe,
    mixture_tv_modulus_probe,
    support_probe,
    tv_contrast_probe,
)
from dsb_lab.index_space import Box, build_grid
from dsb_lab.latent_field import CovKernelSpec
from dsb_lab.mixture import MixtureKernelSpec
from dsb_lab.stick_process import StickSpec

LADDER = (1.0, 0.5, 0.25, 0.125)
LOCS3 = build_grid(Box((0.0,), (1.0,)), 3)


def _cfg(variant="thetaDDP", n=300, seed=1, **kw):
    return ProbeConfig(ProcessSpec(variant, StickSpec(truncation=kw.pop("N", 30))), n=n, seed=seed, **kw)


def test_probe_config_invariants():
    with pytest.raises(ValueError, match="n must be"):
        _cfg(n=99)
    with pytest.raises(ValueError, match="decreasing"):
        _cfg(ladder=(0.5, 1.0))
    with pytest.raises(ValueError, match="positive"):
        _cfg(epsilon=(0.0,))
    with pytest.raises(ValueError):
        _cfg(seed=-1)


def test_report_schema_and_status():
    rep = DiagnosticsReport("x", [Row("a", 1.0, 0.1, 100)], [Verdict("ok", 0.1, True)], 3, "abc")
    d = json.loads(rep.to_json())
    assert set(d) >= {"probe", "config_digest", "rows", "verdicts", "seed", "runtime_seconds"}
    assert d["rows"][0] == {"label": "a", "estimate": 1.0, "stderr": 0.1, "n": 100}
    assert d["verdicts"][0]["pass"] is True and d["verdicts"][0]["tolerance"] == 0.1
    rep.verdicts.append(Verdict("maybe", 0.2, None, "inconclusive"))
    assert rep.status == "inconclusive"
    rep.verdicts.append(Verdict("bad", 0.3, False))
    assert rep.status == "fail"
    assert "FAIL" in rep.to_text()


# -- marginal ---------------------------------------------------------------------


def test_marginal_probe_null_and_power():
    cfg = _cfg(n=10_000, seed=4)
    rep = marginal_beta_probe(cfg, build_grid(Box((0.0,), (1.0,)), 5))
    assert rep.status == "pass"
    assert all(r.stderr > 0 for r in rep.rows)
    wrong = marginal_beta_probe(cfg, LOCS3, test_alpha=2.0)
    assert all(p < 0.01 for p in wrong.details["p_values"])
    assert wrong.status == "fail"


def test_marginal_probe_minimum_n():
    with pytest.raises(ValueError, match="n >= 1000"):
        marginal_beta_probe(_cfg(n=500), LOCS3)


def test_marginal_null_calibration_across_seeds():
    passes = [marginal_beta_probe(_cfg(n=1000, seed=s), LOCS3).status == "pass" for s in range(20)]
    assert sum(passes) >= 17  # per-run false alarm rate ~ 3%


# -- continuity -------------------------------------------------------------------


def test_continuity_zero_distance_and_monotone():
    rep = continuity_modulus_probe(_cfg(n=500), [0.0], LADDER + (0.0,))
    assert rep.rows[-1].estimate == 0.0 and rep.rows[-1].stderr == 0.0
    assert rep.status == "pass"
    assert rep.details["panel_size"] == 7


def test_continuity_constant_panel_is_zero():
    cfg = _cfg("DDP", n=200, panel=TestFunctionPanel((constant(1.0), constant(-0.3))))
    rep = continuity_modulus_probe(cfg, [0.0], LADDER)
    assert np.all(rep.estimates() == 0.0)


def test_reproducible_and_thread_independent():
    a = continuity_modulus_probe(_cfg("DDP", n=200, threads=1), [0.0], LADDER)
    b = continuity_modulus_probe(_cfg("DDP", n=200, threads=1), [0.0], LADDER)
    c = continuity_modulus_probe(_cfg("DDP", n=200, threads=4), [0.0], LADDER)
    assert a.to_json(include_runtime=False) == b.to_json(include_runtime=False)
    assert np.array_equal(a.estimates(), c.estimates()) and np.array_equal(a.stderrs(), c.stderrs())
    d = continuity_modulus_probe(_cfg("DDP", n=200, seed=2), [0.0], LADDER)
    assert not np.array_equal(a.estimates(), d.estimates())


def test_stderr_scales_with_root_n():
    small = continuity_modulus_probe(_cfg("DDP", n=250), [0.0], LADDER).stderrs()
    big = continuity_modulus_probe(_cfg("DDP", n=1000), [0.0], LADDER).stderrs()
    ratio = small / big
    assert np.all(np.abs(ratio - 2.0) < 0.4)


# -- TV contrast --------------------------------------------------------------------


def test_tv_contrast_small():
    theta = _cfg("thetaDDP", n=200, N=50)
    contrast = [_cfg("DDP", n=200, N=50), _cfg("wDDP", n=200, N=50)]
    rep = tv_contrast_probe(theta, contrast, [0.0], (1.0, 0.25, 1 / 16, 0.0), theta_final_max=None)
    est = dict(zip([r.label for r in rep.rows], rep.estimates()))
    assert est["thetaDDP d=0"] == 0.0
    assert est["DDP d=0"] == 0.0
    for v in ("DDP", "wDDP"):
        for d in ("1", "0.25", "0.0625"):
            assert est[f"{v} d={d}"] >= 1.99
    assert est["thetaDDP d=0.0625"] < est["thetaDDP d=1"]
    assert rep.status == "pass"
    with pytest.raises(ValueError, match="thetaDDP"):
        tv_contrast_probe(contrast[0], contrast, [0.0], (1.0,))


# -- association --------------------------------------------------------------------


def test_association_exact_one_and_far_zero():
    cfg = _cfg("DDP", n=1000, seed=5)
    rep = association_probe(cfg, [0.0], [np.inf], [0.0], (1.0, 0.5, 0.25, 0.0), far=20.0)
    est = rep.estimates()
    assert est[3] == 1.0
    assert abs(est[-1]) < 3 * rep.stderrs()[-1]
    assert rep.status == "pass"


def test_association_degenerate_box():
    with pytest.raises(ProbeError, match="B="):
        association_probe(_cfg("DDP", n=100), [-np.inf], [np.inf], [0.0], (1.0, 0.0))


# -- support ------------------------------------------------------------------------


def test_support_trivial_epsilons():
    rep = support_probe(_cfg(n=200), LOCS3, epsilon=[0.0, 2.0, 2.5])
    freq = rep.estimates()
    assert freq[0] == 0.0
    assert freq[1] == 1.0 and freq[2] == 1.0
    assert rep.verdicts[0].status == "inconclusive" and rep.verdicts[0].passed is None
    assert "smallest observed" in rep.verdicts[0].check
    assert rep.verdicts[1].passed


def test_support_reproducible_target():
    a = support_probe(_cfg(n=200, seed=3), LOCS3, epsilon=[0.5])
    b = support_probe(_cfg(n=200, seed=3), LOCS3, epsilon=[0.5])
    assert a.to_json(include_runtime=False) == b.to_json(include_runtime=False)


GAUSS = MixtureKernelSpec("gaussian_loc")


def test_kl_support_trivial_and_inconclusive():
    grid = GAUSS.grid(801)
    rep = kl_support_probe(_cfg(n=100), GAUSS, [1.0], LOCS3, epsilon=[1e6], grid=grid)
    assert rep.estimates()[0] == 1.0
    # a target spread over all of Y cannot be matched by unit-scale mixtures of N(0, 1) atoms
    wide = np.full((1, 3, len(grid)), 1.0 / (grid.hi - grid.lo))
    rep = kl_support_probe(_cfg(n=100), GAUSS, [1.0], LOCS3, epsilon=[0.1], target=wide, grid=grid)
    assert rep.status == "inconclusive"


def test_kl_support_refuses_failing_kernel():
    with pytest.raises(DecayConditionError, match="decay"):
        kl_support_probe(_cfg(n=100), MixtureKernelSpec("beta_free"), [1.0], LOCS3, epsilon=[0.1])


# -- mixture modulus -------------------------------------------------------------------


@pytest.mark.parametrize("axis", ["x", "gamma"])
def test_mixture_modulus(axis):
    rep = mixture_tv_modulus_probe(_cfg("DDP", n=200), GAUSS, 0.5, [0.0], (1.0, 0.5, 0.25, 0.125, 0.0), axis=axis, grid=GAUSS.grid(801))
    est = rep.estimates()
    assert est[-1] == 0.0
    assert est[-2] < est[0]
    assert rep.status == "pass"
    assert rep.details["max_normalization_error"] < 1e-6


def test_beta_constrained_mixture_normalized():
    atoms = AtomSpec(marginals=(Marginal("uniform", lower=1.0, upper=5.0),))
    cfg = ProbeConfig(ProcessSpec("DDP", StickSpec(truncation=20), atoms), n=100, seed=2)
    rep = mixture_tv_modulus_probe(cfg, MixtureKernelSpec("beta_constrained"), 2.0, [0.0], (1.0, 0.5, 0.0))
    assert rep.details["max_normalization_error"] < 1e-6
