"""Command-line entry point: ``dsb-lab <command> --config PATH``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__, streams
from .atom_process import AtomSpec, Marginal
from .config import ConfigError, RunConfig, parse_config
from .ddp_core import ProcessSpec, path_table, sample_path
from .diagnostics import (
    DiagnosticsReport,
    ProbeConfig,
    ProbeError,
    association_probe,
    continuity_modulus_probe,
    kl_support_probe,
    marginal_beta_probe,
    mixture_tv_modulus_probe,
    support_probe,
    tv_contrast_probe,
)
from .index_space import Box, build_grid
from .latent_field import CovKernelSpec, FactorizationError
from .mixture import MixtureKernelSpec, check_decay_condition, mixture_density_batch
from .stick_process import StickSpec

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_IO = 3


@dataclass
class RunManifest:
    command: str
    config_digest: str
    seed: int
    artifacts: list = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    runtime_seconds: float = 0.0
    status: str = "ok"
    verdicts: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_VERDICT if self.status == "fail" else EXIT_OK

    def to_json(self) -> str:
        return json.dumps(
            {
                "command": self.command,
                "config_digest": self.config_digest,
                "seed": self.seed,
                "artifacts": self.artifacts,
                "versions": self.versions,
                "runtime_seconds": self.runtime_seconds,
                "status": self.status,
                "verdicts": self.verdicts,
            },
            indent=2,
        ) + "\n"


# -- formatting and atomic output -----------------------------------------------


def format_value(v) -> str:
    """CSV cell text: shortest round-trip floats, exponent notation below 1e-4."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- config -> objects ------------------------------------------------------------


def build_process(cfg: RunConfig, variant: str | None = None) -> ProcessSpec:
    p = cfg.sections["process"]
    a = cfg.sections["atoms"]
    sticks = StickSpec(
        alpha=p["alpha"],
        kernel=CovKernelSpec(p["stick_sigma0"], p["stick_tau"], p["stick_mean"]),
        truncation=p["truncation"],
        tail_target=p["tail_target"],
    )
    marginal = Marginal(a["marginal"], a["loc"], a["scale"], a["lower"], a["upper"])
    atoms = AtomSpec(
        theta_dim=a["dim"],
        marginals=(marginal,),
        kernel=CovKernelSpec(a["sigma0"], a["tau"], a["mean"]),
        variant_hint="circle" if a["circle"] else "field",
    )
    return ProcessSpec(variant or p["variant"], sticks, atoms)


def build_grid_locations(cfg: RunConfig):
    s = cfg.sections["space"]
    return build_grid(Box(tuple(s["lo"]), tuple(s["hi"])), s["resolution"] if len(s["resolution"]) > 1 else s["resolution"][0])


def build_kernel(cfg: RunConfig) -> MixtureKernelSpec:
    k = cfg.sections["kernel"]
    return MixtureKernelSpec(
        family=k["family"], y_lo=k["y_lo"], y_hi=k["y_hi"], gamma_min=k["gamma_min"], gamma_max=k["gamma_max"],
        beta_max=k["beta_max"], alpha_max=k["alpha_max"],
    )


def _x0(cfg: RunConfig):
    s = cfg.sections["space"]
    return s["x0"] if s["x0"] is not None else s["lo"]


def probe_config(cfg: RunConfig, threads, variant: str | None = None) -> ProbeConfig:
    pr = cfg.sections["probe"]
    return ProbeConfig(
        build_process(cfg, variant),
        n=pr["n"],
        seed=cfg.seed,
        se_factor=pr["se_factor"],
        level=pr["level"],
        ladder=tuple(cfg.sections["space"]["ladder"]),
        threads=threads,
    )


def run_probe(name: str, cfg: RunConfig, threads) -> DiagnosticsReport:
    pr = cfg.sections["probe"]
    sp = cfg.sections["space"]
    pc = probe_config(cfg, threads)
    if name == "marginal_beta":
        return marginal_beta_probe(pc, build_grid_locations(cfg), pr["test_alpha"])
    if name == "continuity_modulus":
        return continuity_modulus_probe(pc, _x0(cfg), direction=sp["direction"], final_ratio=pr["final_ratio"])
    if name == "tv_contrast":
        theta = probe_config(cfg, threads, "thetaDDP")
        others = [probe_config(cfg, threads, v) for v in ("DDP", "wDDP")]
        return tv_contrast_probe(theta, others, _x0(cfg), direction=sp["direction"],
                                 theta_final_max=pr["theta_final_max"], contrast_floor=pr["contrast_floor"])
    if name == "association":
        return association_probe(pc, pr["box_lo"], pr["box_hi"], _x0(cfg), far=pr["far"],
                                 direction=sp["direction"], far_factor=pr["far_factor"])
    if name == "support":
        return support_probe(pc, build_grid_locations(cfg), pr["epsilon_weak"])
    k = cfg.sections["kernel"]
    kernel = build_kernel(cfg)
    grid = kernel.grid(k["nodes"])
    if name == "kl_support":
        return kl_support_probe(pc, kernel, k["gammas"], build_grid_locations(cfg), pr["epsilon_kl"], grid=grid)
    if name == "mixture_tv_modulus":
        return mixture_tv_modulus_probe(pc, kernel, k["gamma0"], _x0(cfg), axis=k["axis"], direction=sp["direction"], grid=grid)
    raise ValueError(f"unknown probe {name!r}")


# -- commands ---------------------------------------------------------------------


def _emit(out_dir, stem, manifest, formats, text=None, obj=None, table=None):
    items = []
    if "text" in formats and text is not None:
        items.append((f"{stem}.txt", text))
    if "json" in formats and obj is not None:
        items.append((f"{stem}.json", obj))
    if "csv" in formats and table is not None:
        items.append((f"{stem}.csv", csv_text(*table)))
    for name, content in items:
        write_atomic(os.path.join(out_dir, name), content)
        manifest.artifacts.append(name)


def run(cfg: RunConfig, out_dir: str | None = None, threads: int | None = None, quiet: bool = True) -> RunManifest:
    """Execute a validated run and write its artifacts plus ``manifest.json``."""
    t0 = time.perf_counter()
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    threads = threads or cfg.threads or streams.default_threads()
    manifest = RunManifest(
        cfg.command, cfg.digest(), cfg.seed,
        versions={"dsb_lab": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    )
    formats = cfg.formats

    def say(msg):
        if not quiet:
            print(msg)

    if cfg.command in ("simulate", "mixture"):
        locs = build_grid_locations(cfg)
        path = sample_path(build_process(cfg), locs, streams.stream(cfg.seed, streams.probe_key(cfg.command)))
        write_atomic(os.path.join(out_dir, "path.csv"), csv_text(*path_table(path)))
        manifest.artifacts.append("path.csv")
        say(f"sampled {path.variant} path: {len(locs)} locations x {path.weights.shape[1]} atoms "
            f"(max tail {float(np.max(path.tail)):.3g})")
        if cfg.command == "mixture":
            k = cfg.sections["kernel"]
            kernel = build_kernel(cfg)
            grid = kernel.grid(k["nodes"])
            dens = mixture_density_batch(path.weights, path.atoms, kernel, k["gammas"], grid)
            rows = [
                [float(y), float(g), j, float(dens[a, j, i])]
                for a, g in enumerate(k["gammas"])
                for j in range(len(locs))
                for i, y in enumerate(grid.nodes)
            ]
            write_atomic(os.path.join(out_dir, "density.csv"), csv_text(["y", "gamma", "loc_index", "density"], rows))
            manifest.artifacts.append("density.csv")
            say(f"evaluated {len(k['gammas'])} x {len(locs)} mixture densities on {len(grid)} nodes")
        manifest.status = "ok"

    elif cfg.command == "decay-check":
        k = cfg.sections["kernel"]
        kernel = build_kernel(cfg)
        y0 = k["y0"] if k["y0"] is not None else 0.5 * (kernel.y_lo + kernel.y_hi)
        gamma0 = k["gamma0"] if kernel.uses_gamma else None
        rep = check_decay_condition(kernel, y0, gamma0, k["epsilon"], k["shells"])
        d = rep.to_dict()
        text = (
            f"decay check for {rep.family} at y0={rep.y0:g}, gamma0={rep.gamma0}, epsilon={rep.epsilon:g}\n"
            + "".join(f"  shell {s:g}: sup psi = {v:.6g}\n" for s, v in zip(rep.shells, rep.profile))
            + (f"  growth exponent of psi(1/2,t,t) on [100, 400]: {rep.growth_exponent:.4f}\n" if rep.growth_exponent is not None else "")
            + f"  {'PASS' if rep.passed else 'FAIL'}\n"
        )
        _emit(out_dir, "decay", manifest, formats, text=text, obj=json.dumps(d, indent=2) + "\n",
              table=(["shell", "sup_psi"], [[float(s), float(v)] for s, v in zip(rep.shells, rep.profile)]))
        manifest.status = "pass" if rep.passed else "fail"
        manifest.verdicts["decay"] = manifest.status
        say(text.rstrip())

    else:
        statuses = []
        for name in cfg.sections["probe"]["probes"]:
            report = run_probe(name, cfg, threads)
            manifest.verdicts[name] = report.status
            statuses.append(report.status)
            _emit(out_dir, name, manifest, formats, text=report.to_text(),
                  obj=report.to_json(include_runtime=False), table=report.csv_rows())
            say(report.to_text().rstrip())
        manifest.status = "fail" if "fail" in statuses else ("inconclusive" if "inconclusive" in statuses else "pass")

    manifest.runtime_seconds = time.perf_counter() - t0
    manifest.artifacts.append("manifest.json")
    write_atomic(os.path.join(out_dir, "manifest.json"), manifest.to_json())
    return manifest


def _threads_arg(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return n


def _seed_arg(value: str) -> int:
    try:
        return streams.check_seed(int(value))
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dsb-lab", description=__doc__)
    parser.add_argument("command", choices=["simulate", "probe", "mixture", "decay-check"])
    parser.add_argument("--config", required=True, help="run description file")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=_seed_arg, help="override run.seed (unsigned 64-bit)")
    parser.add_argument("--quiet", action="store_true", help="suppress the text summary on stdout")
    parser.add_argument("--threads", type=_threads_arg, help="worker cap (fallback: DSB_LAB_THREADS)")
    args = parser.parse_args(argv)

    try:
        with open(args.config, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"dsb-lab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text, command=args.command, seed=args.seed)
        threads = args.threads or cfg.threads or streams.default_threads()
    except (ConfigError, ValueError) as exc:
        print(f"dsb-lab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(cfg, args.out, threads, quiet=args.quiet)
    except OSError as exc:
        print(f"dsb-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ProbeError, FactorizationError, ValueError) as exc:
        print(f"dsb-lab: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    if not args.quiet:
        print(f"status: {manifest.status}; artifacts in {os.path.abspath(args.out or cfg.output_dir)}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
