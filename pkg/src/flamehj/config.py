"""Run configuration: one JSON document with flow, solver, experiment and output blocks."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .cell_solver import SolverConfig
from .errors import ConfigError
from .flow import FlowField, flow_from_config

EXPERIMENTS = ("weak-flow", "strong-flow", "shear", "cellular")
FORMATS = ("csv", "json", "svg")

_SOLVER_FIELDS = {f.name for f in fields(SolverConfig)}
_EXPERIMENT_KEYS = {
    "kind", "p_list", "eps_list", "A_list", "n_angles", "level", "c", "t_list", "model", "p", "oracle",
    "p2_max", "p2_step", "kappa_tol", "curve", "k_max", "methods", "delta_list",
}


@dataclass
class RunConfig:
    flow: FlowField
    solver: SolverConfig
    experiment: dict = field(default_factory=dict)
    out_dir: Path = Path("out")
    formats: tuple = FORMATS
    seed: int = 0
    threads: int = 1

    def param(self, key, default=None):
        return self.experiment.get(key, default)

    def p_list(self, default=None) -> list:
        """Explicit list of 2-vectors, or a seeded random sample {"random": N, "r_min": a, "r_max": b}."""
        entry = self.experiment.get("p_list", default)
        return parse_p_list(entry, self.seed)


def parse_p_list(entry, seed: int = 0) -> list:
    if entry is None:
        raise ConfigError("experiment.p_list is required")
    if isinstance(entry, dict):
        try:
            count = int(entry["random"])
            r_min = float(entry.get("r_min", 0.25))
            r_max = float(entry.get("r_max", 2.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad random p_list entry: {exc}") from exc
        if count < 1 or not 0 <= r_min <= r_max:
            raise ConfigError("random p_list needs random >= 1 and 0 <= r_min <= r_max")
        rng = np.random.default_rng(seed)
        r = rng.uniform(r_min, r_max, count)
        th = rng.uniform(0.0, 2 * math.pi, count)
        return [(float(a * math.cos(b)), float(a * math.sin(b))) for a, b in zip(r, th)]
    if not isinstance(entry, (list, tuple)) or not entry:
        raise ConfigError("p_list must be a nonempty list of [p1, p2] pairs")
    out = []
    for item in entry:
        try:
            a, b = (float(v) for v in item)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad p_list entry {item!r}") from exc
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ConfigError(f"p_list entry {item!r} is not finite")
        out.append((a, b))
    return out


def _float_list(block: dict, key: str, positive: bool = True) -> None:
    if key not in block:
        return
    val = block[key]
    if not isinstance(val, (list, tuple)) or not val:
        raise ConfigError(f"experiment.{key} must be a nonempty list")
    try:
        nums = [float(v) for v in val]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"experiment.{key} must contain numbers") from exc
    if positive and any(not (v > 0 and math.isfinite(v)) for v in nums):
        raise ConfigError(f"experiment.{key} entries must be positive")
    block[key] = nums


def _writable(path: Path) -> bool:
    probe = path
    while not probe.exists():
        if probe.parent == probe:
            return False
        probe = probe.parent
    return probe.is_dir() and os.access(probe, os.W_OK)


def build_config(doc: dict, out_dir: str | None = None, seed: int = 0, threads: int = 1) -> RunConfig:
    """Validate a parsed JSON document; every problem becomes ``ConfigError``."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - {"flow", "solver", "experiment", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    flow = flow_from_config(doc.get("flow", {"builtin": "zero"}))

    solver_block = doc.get("solver", {}) or {}
    if not isinstance(solver_block, dict):
        raise ConfigError("solver block must be an object")
    bad = set(solver_block) - _SOLVER_FIELDS
    if bad:
        raise ConfigError(f"unknown solver keys: {sorted(bad)}")
    try:
        solver = SolverConfig(**solver_block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver block: {exc}") from exc

    exp = dict(doc.get("experiment", {}) or {})
    bad = set(exp) - _EXPERIMENT_KEYS
    if bad:
        raise ConfigError(f"unknown experiment keys: {sorted(bad)}")
    for key in ("eps_list", "A_list", "t_list", "delta_list"):
        _float_list(exp, key, positive=key != "t_list")
    if "t_list" in exp and any(t < 0 for t in exp["t_list"]):
        raise ConfigError("experiment.t_list entries must be >= 0")
    if "n_angles" in exp:
        # 0 is accepted by sweeps that can skip their level curves
        if not isinstance(exp["n_angles"], int) or (exp["n_angles"] != 0 and exp["n_angles"] < 8):
            raise ConfigError("experiment.n_angles must be 0 or an integer >= 8")
    if "kind" in exp and exp["kind"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment kind {exp['kind']!r}; expected one of {EXPERIMENTS}")
    if "p_list" in exp:
        parse_p_list(exp["p_list"], seed)

    output = doc.get("output", {}) or {}
    if not isinstance(output, dict):
        raise ConfigError("output block must be an object")
    target = Path(out_dir or output.get("dir", "out"))
    formats = tuple(output.get("formats", FORMATS))
    if not formats or any(f not in FORMATS for f in formats):
        raise ConfigError(f"output.formats must be a nonempty subset of {FORMATS}")
    if not _writable(target):
        raise ConfigError(f"output directory {target} is not writable")
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    return RunConfig(flow, solver, exp, target, formats, int(seed), int(threads))


def load_config(path: str | None, out_dir: str | None = None, seed: int = 0, threads: int = 1) -> RunConfig:
    if path is None:
        doc = {}
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return build_config(doc, out_dir, seed, threads)
