"""Sectioned key-value run descriptions.

Grammar: ``[section]`` headers, ``key = value`` lines, ``#`` comments, lists
as comma-separated values.  Literals are typed by their spelling: integers,
floats, ``true``/``false`` and strings (bare or double-quoted).  Every key is
checked against a schema; unknown keys, duplicate sections/keys and type
mismatches are reported together.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from . import streams

COMMANDS = ("simulate", "probe", "mixture", "decay-check")
PROBES = (
    "marginal_beta",
    "continuity_modulus",
    "tv_contrast",
    "association",
    "support",
    "kl_support",
    "mixture_tv_modulus",
)

# section -> key -> (type, default); REQUIRED marks keys without a default
REQUIRED = object()
SCHEMA = {
    "run": {
        "command": ("str", None),
        "seed": ("int", REQUIRED),
        "threads": ("int", None),
    },
    "process": {
        "variant": ("str", "thetaDDP"),
        "alpha": ("float", 1.0),
        "truncation": ("int", None),
        "tail_target": ("float", None),
        "stick_sigma0": ("float", 1.0),
        "stick_tau": ("float", 1.0),
        "stick_mean": ("float", 0.0),
    },
    "atoms": {
        "dim": ("int", 1),
        "marginal": ("str", "normal"),
        "loc": ("float", 0.0),
        "scale": ("float", 1.0),
        "lower": ("float", 0.0),
        "upper": ("float", 1.0),
        "circle": ("bool", False),
        "sigma0": ("float", 1.0),
        "tau": ("float", 1.0),
        "mean": ("float", 0.0),
    },
    "space": {
        "lo": ("list[float]", [0.0]),
        "hi": ("list[float]", [1.0]),
        "resolution": ("list[int]", [5]),
        "x0": ("list[float]", None),
        "ladder": ("list[float]", [1.0, 0.5, 0.25, 0.125, 0.0625]),
        "direction": ("list[float]", None),
    },
    "kernel": {
        "family": ("str", "gaussian_loc"),
        "gammas": ("list[float]", [1.0]),
        "gamma0": ("float", 0.5),
        "y_lo": ("float", None),
        "y_hi": ("float", None),
        "nodes": ("int", 2001),
        "gamma_min": ("float", 0.05),
        "gamma_max": ("float", 10.0),
        "beta_max": ("float", 5.0),
        "alpha_max": ("float", 50.0),
        "axis": ("str", "x"),
        "y0": ("float", None),
        "epsilon": ("float", 0.01),
        "shells": ("list[float]", None),
    },
    "probe": {
        "probes": ("list[str]", REQUIRED),
        "n": ("int", 2000),
        "epsilon_weak": ("list[float]", [0.25]),
        "epsilon_kl": ("list[float]", [0.1]),
        "se_factor": ("float", 2.0),
        "level": ("float", 0.01),
        "final_ratio": ("float", None),
        "theta_final_max": ("float", 0.2),
        "contrast_floor": ("float", 1.9),
        "box_lo": ("list[float]", [0.0]),
        "box_hi": ("list[float]", [float("inf")]),
        "far": ("float", None),
        "far_factor": ("float", 3.0),
        "test_alpha": ("float", None),
    },
    "output": {
        "dir": ("str", "out"),
        "formats": ("list[str]", ["text", "json", "csv"]),
    },
}

NEEDS = {
    "simulate": ("run", "process", "space"),
    "mixture": ("run", "process", "space", "kernel"),
    "decay-check": ("run", "kernel"),
    "probe": ("run", "process", "space", "probe"),
}
NON_SEMANTIC = {("run", "threads"), ("run", "command"), ("output", "dir"), ("output", "formats")}

_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|inf|nan)$", re.IGNORECASE)
_SECTION = re.compile(r"^\[\s*([A-Za-z_][\w-]*)\s*\]$")
_KEY = re.compile(r"^([A-Za-z_][\w-]*)\s*=\s*(.*)$")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


def _literal(tok: str):
    tok = tok.strip()
    if len(tok) >= 2 and tok[0] == tok[-1] == '"':
        return tok[1:-1]
    low = tok.lower()
    if low in ("true", "false"):
        return low == "true"
    if _INT.match(tok):
        return int(tok)
    if _FLOAT.match(tok):
        return float(tok)
    return tok


def _split_list(raw: str) -> list[str]:
    out, cur, quoted = [], [], False
    for ch in raw:
        if ch == '"':
            quoted = not quoted
        if ch == "," and not quoted:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [t.strip() for t in out]


def _strip_comment(line: str) -> str:
    quoted = False
    for k, ch in enumerate(line):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:k]
    return line


def _coerce(kind: str, raw: str, where: str, errors: list):
    def scalar(tok, base):
        v = _literal(tok)
        if base == "float" and isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v)
        if base == "int" and isinstance(v, int) and not isinstance(v, bool):
            return v
        if base == "bool" and isinstance(v, bool):
            return v
        if base == "str" and isinstance(v, str):
            return v
        errors.append(f"{where}: expected {base}, got {tok.strip()!r}")
        return None

    if kind.startswith("list["):
        base = kind[5:-1]
        toks = [t for t in _split_list(raw)]
        if any(t == "" for t in toks):
            errors.append(f"{where}: empty list element")
            return None
        return [scalar(t, base) for t in toks]
    if "," in raw and not (raw.strip().startswith('"') and raw.strip().endswith('"')):
        errors.append(f"{where}: expected a single {kind}, got a list")
        return None
    return scalar(raw, kind)


@dataclass
class RunConfig:
    command: str
    seed: int
    sections: dict
    threads: int | None = None
    present: tuple = ()

    def get(self, section: str, key: str):
        return self.sections[section][key]

    @property
    def output_dir(self) -> str:
        return self.sections["output"]["dir"]

    @property
    def formats(self) -> list[str]:
        return list(self.sections["output"]["formats"])

    def semantic(self) -> dict:
        sem = {"command": self.command, "seed": self.seed}
        for sec in NEEDS[self.command]:
            sem[sec] = {k: v for k, v in self.sections[sec].items() if (sec, k) not in NON_SEMANTIC}
        sem.pop("run", None)
        return sem

    def digest(self) -> str:
        text = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_config(text: str, command: str | None = None, seed: int | None = None) -> RunConfig:
    """Parse and validate a run description.

    ``command`` and ``seed`` (when given) override the ``[run]`` entries, as
    the CLI does for its positional command and ``--seed`` flag.
    """
    if text.startswith("﻿"):
        text = text[1:]
    errors: list[str] = []
    raw: dict[str, dict[str, tuple[str, int]]] = {}
    section = None
    for lineno, line in enumerate(text.replace("\r\n", "\n").split("\n"), 1):
        line = _strip_comment(line).strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            if section in raw:
                errors.append(f"line {lineno}: duplicate section [{section}]")
                section = "\0dup"
                raw.setdefault(section, {})
                continue
            if section not in SCHEMA:
                errors.append(f"line {lineno}: unknown section [{section}]")
            raw[section] = {}
            continue
        m = _KEY.match(line)
        if not m:
            errors.append(f"line {lineno}: cannot parse {line!r} (expected 'key = value')")
            continue
        if section is None:
            errors.append(f"line {lineno}: key {m.group(1)!r} appears before any [section]")
            continue
        key, value = m.group(1), m.group(2).strip()
        if section == "\0dup":
            continue
        if key in raw[section]:
            errors.append(f"line {lineno}: duplicate key {section}.{key}")
            continue
        if value == "":
            errors.append(f"line {lineno}: {section}.{key} has no value")
            continue
        raw[section][key] = (value, lineno)

    sections: dict[str, dict] = {}
    for sec, schema in SCHEMA.items():
        given = raw.get(sec, {})
        vals = {}
        for key, (value, lineno) in given.items():
            if key not in schema:
                errors.append(f"line {lineno}: unknown key {sec}.{key}")
                continue
            vals[key] = _coerce(schema[key][0], value, f"line {lineno}: {sec}.{key}", errors)
        for key, (_, default) in schema.items():
            if key not in vals:
                vals[key] = default
        sections[sec] = vals

    run = sections["run"]
    if seed is not None:
        run["seed"] = seed
    if command is not None:
        if run["command"] is not None and run["command"] != command:
            errors.append(f"run.command = {run['command']!r} conflicts with the requested command {command!r}")
        run["command"] = command
    cmd = run["command"]
    if cmd is None:
        errors.append("run.command is required")
    elif cmd not in COMMANDS:
        errors.append(f"run.command must be one of {COMMANDS}, got {cmd!r}")
    if run["seed"] is REQUIRED or run["seed"] is None:
        errors.append("run.seed is required (no wall-clock default)")
    else:
        try:
            streams.check_seed(run["seed"])
        except (TypeError, ValueError) as exc:
            errors.append(f"run.seed: {exc}")
    if run["threads"] is not None and run["threads"] < 1:
        errors.append("run.threads must be >= 1")

    if cmd in NEEDS:
        for sec in NEEDS[cmd]:
            if sec != "run" and sec not in raw:
                errors.append(f"command {cmd!r} needs a [{sec}] section")
        if cmd == "probe" and "probe" in raw:
            probes = sections["probe"]["probes"]
            if probes is REQUIRED:
                errors.append("probe.probes is required")
            else:
                for p in probes or []:
                    if p not in PROBES:
                        errors.append(f"probe.probes: unknown probe {p!r} (choose from {', '.join(PROBES)})")
                if any(p in ("kl_support", "mixture_tv_modulus") for p in probes or []) and "kernel" not in raw:
                    errors.append("probes kl_support / mixture_tv_modulus need a [kernel] section")

    _validate_values(sections, errors)
    if errors:
        raise ConfigError(errors)
    for sec in sections.values():
        for k, v in sec.items():
            if v is REQUIRED:
                sec[k] = None
    return RunConfig(cmd, int(run["seed"]), sections, run["threads"], tuple(s for s in raw if s in SCHEMA))


def _validate_values(sections: dict, errors: list) -> None:
    p = sections["process"]
    if p["alpha"] is not None and not p["alpha"] > 0:
        errors.append(f"process.alpha must be > 0 (alpha_min > 0; Beta(1, 0) is degenerate), got {p['alpha']}")
    if p["variant"] not in ("DDP", "wDDP", "thetaDDP"):
        errors.append(f"process.variant must be DDP, wDDP or thetaDDP, got {p['variant']!r}")
    if p["truncation"] is not None and p["truncation"] < 1:
        errors.append("process.truncation must be >= 1")
    if p["truncation"] is not None and p["tail_target"] is not None:
        errors.append("process: give truncation or tail_target, not both")
    for key in ("stick_sigma0", "stick_tau"):
        if p[key] is not None and not p[key] > 0:
            errors.append(f"process.{key} must be > 0")
    a = sections["atoms"]
    if a["marginal"] not in ("normal", "uniform"):
        errors.append(f"atoms.marginal must be normal or uniform, got {a['marginal']!r}")
    for key in ("sigma0", "tau", "scale"):
        if a[key] is not None and not a[key] > 0:
            errors.append(f"atoms.{key} must be > 0")
    if a["marginal"] == "uniform" and a["lower"] is not None and a["upper"] is not None and not a["lower"] < a["upper"]:
        errors.append("atoms: uniform marginal needs lower < upper")
    s = sections["space"]
    if all(isinstance(s[k], list) for k in ("lo", "hi")) and len(s["lo"]) != len(s["hi"]):
        errors.append("space.lo and space.hi differ in dimension")
    lad = s["ladder"]
    if isinstance(lad, list) and all(isinstance(d, float) for d in lad):
        if any(b >= a_ for a_, b in zip(lad, lad[1:])):
            errors.append("space.ladder must be strictly decreasing")
        if any(d < 0 for d in lad):
            errors.append("space.ladder must be nonnegative")
    k = sections["kernel"]
    if k["family"] not in ("gaussian_loc", "beta_constrained", "beta_free"):
        errors.append(f"kernel.family must be gaussian_loc, beta_constrained or beta_free, got {k['family']!r}")
    if k["axis"] not in ("x", "gamma"):
        errors.append("kernel.axis must be x or gamma")
    pr = sections["probe"]
    if pr["n"] is not None and pr["n"] < 100:
        errors.append(f"probe.n must be >= 100, got {pr['n']}")
    for key in ("epsilon_weak", "epsilon_kl"):
        if isinstance(pr[key], list) and any(e is not None and not e > 0 for e in pr[key]):
            errors.append(f"probe.{key} values must be > 0")
    o = sections["output"]
    if isinstance(o["formats"], list):
        for f in o["formats"]:
            if f not in ("text", "json", "csv"):
                errors.append(f"output.formats: unknown format {f!r}")
