"""Experiment configuration: strict JSON schema, defaults, canonical hashing.

One human-editable JSON file per experiment.  Unknown keys anywhere fail
loudly; range violations are collected and reported together.  The canonical
form (defaults applied, keys sorted) is what gets hashed into run manifests,
so identical configs reproduce identical config hashes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .geometry import FractionalSetup

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "geometry-check", "fractional-apply", "solve-extension", "barrier-check",
    "slide-paraboloids", "harnack", "schauder-decay", "end-to-end",
)


class ConfigError(ValueError):
    pass


def _num(lo=None, hi=None, integer=False, lo_open=False, hi_open=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "must be a number"
        if integer and int(v) != v:
            return "must be an integer"
        if lo is not None and (v <= lo if lo_open else v < lo):
            return f"must be {'>' if lo_open else '>='} {lo}"
        if hi is not None and (v >= hi if hi_open else v > hi):
            return f"must be {'<' if hi_open else '<='} {hi}"
        return None
    return check


def _boolean(v):
    return None if isinstance(v, bool) else "must be a boolean"


def _string(v):
    return None if isinstance(v, str) else "must be a string"


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {options}"
    return check


_SETUP_SCHEMA = {
    "s": (0.5, _num(0.0, 1.0, lo_open=True, hi_open=True)),
    "lambda": (1.0, _num(0.0, lo_open=True)),
    "Lambda": (1.0, _num(0.0, lo_open=True)),
    "alpha": (0.5, _num(0.0, 1.0, lo_open=True, hi_open=True)),
}

_QUAD_SCHEMA = {
    "t_min": (1e-8, _num(0.0, lo_open=True)),
    "t_max": (1e4, _num(0.0, lo_open=True)),
    "nodes": (96, _num(8, integer=True)),
    "substeps": (96, _num(1, integer=True)),
}

_PROBLEM_SCHEMAS = {
    "geometry-check": {
        "samples": (100_000, _num(1, integer=True)),
        "engulfing_samples": (10_000, _num(1, integer=True)),
        "dimension": (1, _choice(1, 2)),
    },
    "fractional-apply": {
        "k": (2, _num(1, integer=True)),
        "grid_points": (512, _num(16, integer=True)),
        "inverse": (False, _boolean),
        "quadrature": (None, None),  # nested
    },
    "solve-extension": {
        "k": (2, _num(1, integer=True)),
        "nx": (257, _num(17, integer=True)),
        "my": (96, _num(8, integer=True)),
        "Z": (1.0, _num(0.0, lo_open=True)),
    },
    "barrier-check": {
        "case": (1, _choice(1, 2)),
        "R": (0.5, _num(0.0, lo_open=True)),
        "rho_fraction": (0.5, _num(0.0, 1.0, lo_open=True, hi_open=True)),
        "alpha": (9.0, _num(0.0, lo_open=True)),
        "samples": (10_000, _num(1, integer=True)),
    },
    "slide-paraboloids": {
        "fixture": ("convex", _choice("convex", "paraboloid", "harmonic")),
        "opening": (1.0, _num(0.0, lo_open=True)),
        "nx": (61, _num(9, integer=True)),
        "nz": (61, _num(9, integer=True)),
        "vertex_stride": (6, _num(1, integer=True)),
        "check_refinement": (True, _boolean),
        "eps_infconv": (0.05, _num(0.0, lo_open=True)),
    },
    "harnack": {
        "family_size": (20, _num(1, integer=True)),
        "kappa": (0.5, _num(0.0, 1.0, lo_open=True, hi_open=True)),
        "R": (0.5, _num(0.0, lo_open=True)),
        "nx": (97, _num(17, integer=True)),
        "my": (48, _num(8, integer=True)),
        "check_refinement": (True, _boolean),
    },
    "schauder-decay": {
        "case": (2, _choice(1, 2, 3)),
        "benchmark": ("kinked", _choice("kinked", "harmonic", "polynomial")),
        "rho": (0.5, _num(0.0, 1.0, lo_open=True, hi_open=True)),
        "depth": (9, _num(2, integer=True)),
        "fit_window": (5, _num(2, integer=True)),
        "mx": (260, _num(40, integer=True)),
        "my": (140, _num(24, integer=True)),
    },
    "end-to-end": {
        "k": (2, _num(1, integer=True)),
        "grid_points": (512, _num(16, integer=True)),
        "subdomain_fraction": (0.5, _num(0.0, 1.0, lo_open=True, hi_open=True)),
    },
}

_TOP_SCHEMA = {
    "schema_version": (SCHEMA_VERSION, _choice(SCHEMA_VERSION)),
    "experiment": (None, _choice(*EXPERIMENT_KINDS)),
    "setup": (None, None),
    "problem": (None, None),
    "output_dir": (".", _string),
    "seed": (0, _num(0, integer=True)),
    "threads": (1, _num(1, integer=True)),
    "emit_plots": (False, _boolean),
}


def _apply_schema(data, schema, path, errors):
    out = {}
    for key in data:
        if key not in schema:
            errors.append(f"{path}{key}: unknown key")
    for key, (default, check) in schema.items():
        if key in data:
            value = data[key]
            if check is not None:
                msg = check(value)
                if msg:
                    errors.append(f"{path}{key}: {msg}")
            out[key] = value
        elif default is not None or key in ("setup", "problem", "quadrature"):
            out[key] = default
        else:
            errors.append(f"{path}{key}: missing required key")
    return out


@dataclass
class ExperimentConfig:
    data: dict

    @property
    def experiment(self):
        return self.data["experiment"]

    @property
    def seed(self):
        return int(self.data["seed"])

    @property
    def threads(self):
        return int(self.data["threads"])

    @property
    def emit_plots(self):
        return bool(self.data["emit_plots"])

    @property
    def output_dir(self):
        return self.data["output_dir"]

    @property
    def problem(self):
        return self.data["problem"]

    def setup(self) -> FractionalSetup:
        st = self.data["setup"]
        return FractionalSetup(s=st["s"], lam=st["lambda"], Lam=st["Lambda"],
                               alpha=st["alpha"])

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":")).encode()

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    def emit(self, path):
        with open(path, "w") as fh:
            json.dump(self.data, fh, sort_keys=True, indent=2)
            fh.write("\n")


def validate(raw: dict) -> ExperimentConfig:
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    top = _apply_schema(raw, _TOP_SCHEMA, "", errors)
    kind = raw.get("experiment")
    if kind in _PROBLEM_SCHEMAS:
        setup_in = raw.get("setup") or {}
        if not isinstance(setup_in, dict):
            errors.append("setup: must be an object")
            setup_in = {}
        top["setup"] = _apply_schema(setup_in, _SETUP_SCHEMA, "setup.", errors)
        lam, Lam = top["setup"].get("lambda"), top["setup"].get("Lambda")
        if isinstance(lam, (int, float)) and isinstance(Lam, (int, float)) and lam > Lam:
            errors.append("setup.Lambda: must be >= setup.lambda")
        prob_in = raw.get("problem") or {}
        if not isinstance(prob_in, dict):
            errors.append("problem: must be an object")
            prob_in = {}
        prob = _apply_schema(prob_in, _PROBLEM_SCHEMAS[kind], "problem.", errors)
        if kind == "fractional-apply":
            quad_in = prob.get("quadrature") or {}
            if not isinstance(quad_in, dict):
                errors.append("problem.quadrature: must be an object")
                quad_in = {}
            prob["quadrature"] = _apply_schema(quad_in, _QUAD_SCHEMA,
                                               "problem.quadrature.", errors)
            if prob["quadrature"]["t_max"] <= prob["quadrature"]["t_min"]:
                errors.append("problem.quadrature.t_max: must exceed t_min")
        top["problem"] = prob
    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(sorted(errors)))
    return ExperimentConfig(top)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}, column "
                          f"{exc.colno}: {exc.msg}") from exc
    return validate(raw)


def default_config(kind, s=None) -> ExperimentConfig:
    """Built-in config for an experiment kind (used by the bare CLI subcommands)."""
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    raw = {"experiment": kind, "setup": {}, "problem": {}}
    if s is not None:
        raw["setup"]["s"] = s
    if kind == "barrier-check" and (s or 0.5) > 0.5:
        raw["problem"] = {"case": 2}
    return validate(raw)
