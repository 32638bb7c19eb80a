"""Run configuration: strict JSON parsing with aggregated validation errors."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .nonlinearity import power_violations
from .radial_core import MIN_NODES
from .solvers.records import Tolerances

COMMANDS = ("solve", "oracle", "diagnostics", "sweep")
GRID_MODES = ("fixed", "auto")

DEFAULTS = {
    "R": 20.0,
    "M": 400,
    "command": "solve",
    "node_targets": [0],
    "tol_residual": 1e-8,
    "tol_mass": 1e-10,
    "tol_pohozaev": 1e-6,
    "max_iter": 2000,
    "seed": 42,
    "output": "out",
    "grid": "fixed",
    "levels": [1, 2, 3, 4, 5, 6, 7, 8],
    "samples": 1000,
    "starts": 8,
    "hierarchy_radius": 2.0,
    "hierarchy_modes": None,
    "sweep": [],
    "workers": None,
}
REQUIRED = ("N", "terms")
KEYS = frozenset(REQUIRED) | frozenset(DEFAULTS)


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    terms: tuple
    radius: float = DEFAULTS["R"]
    count: int = DEFAULTS["M"]
    command: str = "solve"
    node_targets: tuple = (0,)
    tol_residual: float = 1e-8
    tol_mass: float = 1e-10
    tol_pohozaev: float | None = 1e-6
    max_iter: int = 2000
    seed: int = 42
    output: str = "out"
    grid: str = "fixed"
    levels: tuple = tuple(range(1, 9))
    samples: int = 1000
    starts: int = 8
    hierarchy_radius: float = 2.0
    hierarchy_modes: int | None = None
    sweep: tuple = field(default=(), compare=False)
    workers: int | None = None

    @property
    def tolerances(self) -> Tolerances:
        return Tolerances(self.tol_residual, self.tol_mass, self.tol_pohozaev)

    @property
    def modes(self) -> int:
        return self.hierarchy_modes if self.hierarchy_modes is not None else self.count // 4

    def to_dict(self, include_output: bool = True) -> dict:
        """Back to the file format (keys as written in a config file)."""
        d = asdict(self)
        out = {"N": d.pop("dimension"), "R": d.pop("radius"), "M": d.pop("count")}
        out.update(d)
        out["terms"] = [list(t) for t in self.terms]
        out["node_targets"] = list(self.node_targets)
        out["levels"] = list(self.levels)
        out["sweep"] = [dict(s) for s in self.sweep]
        if not include_output:
            del out["output"]
        return out


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)) and math.isfinite(x)


def _int_list(name, value, errors, lo):
    if not isinstance(value, list) or not value:
        errors.append(f"{name} must be a non-empty list of integers")
        return ()
    bad = [v for v in value if not (_is_int(v) and v >= lo)]
    if bad:
        errors.append(f"{name} entries must be integers >= {lo}, got {bad}")
        return ()
    return tuple(value)


def config_from_dict(raw: dict, _in_sweep: bool = False) -> RunConfig:
    """Validate a decoded config; every problem is collected before raising."""
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a JSON object"])
    errors = [f"unknown key {k!r}" for k in sorted(set(raw) - KEYS)]
    errors += [f"missing required key {k!r}" for k in REQUIRED if k not in raw]
    cfg = dict(DEFAULTS)
    cfg.update({k: v for k, v in raw.items() if k in KEYS})

    N = cfg.get("N")
    N_ok = _is_int(N) and N >= 2
    if "N" in raw and not N_ok:
        errors.append(f"N must be an integer >= 2, got {N!r}")
    if not (_is_num(cfg["R"]) and cfg["R"] > 0):
        errors.append(f"R must be a positive number, got {cfg['R']!r}")
    if not (_is_int(cfg["M"]) and cfg["M"] >= MIN_NODES):
        errors.append(f"M must be an integer >= {MIN_NODES}, got {cfg['M']!r}")

    terms = ()
    t = cfg.get("terms")
    if "terms" in raw:
        if (isinstance(t, list) and t and all(isinstance(x, list) and len(x) == 2
                                              and all(_is_num(y) for y in x) for x in t)):
            terms = tuple((float(a), float(p)) for a, p in t)
            if N_ok:
                errors += power_violations(N, terms)
        else:
            errors.append("terms must be a non-empty list of [coefficient, exponent] pairs")

    if cfg["command"] not in COMMANDS:
        errors.append(f"command must be one of {COMMANDS}, got {cfg['command']!r}")
    if _in_sweep and cfg["command"] == "sweep":
        errors.append("a sweep entry cannot itself be a sweep")
    node_targets = _int_list("node_targets", cfg["node_targets"], errors, 0)
    levels = _int_list("levels", cfg["levels"], errors, 1)
    for key in ("tol_residual", "tol_mass"):
        if not (_is_num(cfg[key]) and cfg[key] > 0):
            errors.append(f"{key} must be a positive number, got {cfg[key]!r}")
    if cfg["tol_pohozaev"] is not None and not (_is_num(cfg["tol_pohozaev"])
                                                 and cfg["tol_pohozaev"] > 0):
        errors.append(f"tol_pohozaev must be a positive number or null, got {cfg['tol_pohozaev']!r}")
    for key, lo in (("max_iter", 1), ("samples", 0), ("starts", 1)):
        if not (_is_int(cfg[key]) and cfg[key] >= lo):
            errors.append(f"{key} must be an integer >= {lo}, got {cfg[key]!r}")
    if not _is_int(cfg["seed"]) or cfg["seed"] < 0:
        errors.append(f"seed must be a non-negative integer, got {cfg['seed']!r}")
    if not isinstance(cfg["output"], str) or not cfg["output"]:
        errors.append("output must be a non-empty path string")
    if cfg["grid"] not in GRID_MODES:
        errors.append(f"grid must be one of {GRID_MODES}, got {cfg['grid']!r}")
    if not (_is_num(cfg["hierarchy_radius"]) and cfg["hierarchy_radius"] > 0):
        errors.append(f"hierarchy_radius must be a positive number, got {cfg['hierarchy_radius']!r}")
    hm = cfg["hierarchy_modes"]
    modes = hm if hm is not None else (cfg["M"] // 4 if _is_int(cfg["M"]) else None)
    if hm is not None and not (_is_int(hm) and hm >= 1):
        errors.append(f"hierarchy_modes must be a positive integer or null, got {hm!r}")
    elif _is_int(cfg["M"]) and _is_int(modes) and modes > cfg["M"] // 4:
        errors.append(f"hierarchy_modes = {modes} exceeds M/4 = {cfg['M'] // 4}")
    elif levels and _is_int(modes) and max(levels) > modes:
        errors.append(f"levels go up to {max(levels)} but the hierarchy has {modes} modes")
    if cfg["workers"] is not None and not (_is_int(cfg["workers"]) and cfg["workers"] >= 1):
        errors.append(f"workers must be a positive integer or null, got {cfg['workers']!r}")

    sweep = cfg["sweep"]
    if not isinstance(sweep, list) or not all(isinstance(s, dict) for s in sweep):
        errors.append("sweep must be a list of objects")
        sweep = []
    elif _in_sweep and sweep:
        errors.append("sweep entries cannot contain a sweep")
    if cfg["command"] == "sweep" and not sweep:
        errors.append("command 'sweep' needs a non-empty sweep list")
    if not errors and not _in_sweep:
        base = {k: v for k, v in raw.items() if k not in ("sweep", "command")}
        for i, entry in enumerate(sweep):
            try:
                config_from_dict({**base, **entry}, _in_sweep=True)
            except ConfigError as exc:
                errors += [f"sweep[{i}]: {e}" for e in exc.errors]
    if errors:
        raise ConfigError(errors)
    return RunConfig(
        dimension=N, terms=terms, radius=float(cfg["R"]), count=cfg["M"],
        command=cfg["command"], node_targets=node_targets,
        tol_residual=float(cfg["tol_residual"]), tol_mass=float(cfg["tol_mass"]),
        tol_pohozaev=None if cfg["tol_pohozaev"] is None else float(cfg["tol_pohozaev"]),
        max_iter=cfg["max_iter"], seed=cfg["seed"], output=cfg["output"], grid=cfg["grid"],
        levels=levels, samples=cfg["samples"], starts=cfg["starts"],
        hierarchy_radius=float(cfg["hierarchy_radius"]), hierarchy_modes=hm,
        sweep=tuple(sweep), workers=cfg["workers"])


def parse_config(text: str) -> RunConfig:
    """Parse a JSON config; syntax errors report line and column."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    return config_from_dict(raw)
