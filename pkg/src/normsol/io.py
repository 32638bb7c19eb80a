"""Plain-text persistence of solution records and diagnostics reports.

A record is stored as two files sharing a stem: `<stem>.csv` with the profile
(header `r,u`, 17 significant digits, enough to round-trip every float64) and
`<stem>.json` with the scalar summary.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import radial_core as rc
from .nonlinearity import validate_powers
from .solvers.records import SolutionRecord

PROFILE_COLUMNS = ("r", "u")
SUMMARY_FIELDS = ("N", "R", "M", "terms", "lambda", "energy", "nodes", "residual",
                  "pohozaev_residual", "mass_error", "solver", "iterations", "seed")


class MalformedFile(ValueError):
    pass


def jsonable(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    return repr(obj)


def dump_json(obj, path: Path) -> None:
    Path(path).write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def record_summary(record: SolutionRecord) -> dict:
    g = record.grid
    return {
        "N": g.dimension, "R": g.radius, "M": g.count,
        "terms": [list(t) for t in record.nonlinearity.terms],
        "lambda": record.lam, "energy": record.energy, "nodes": record.nodes,
        "residual": record.residual, "pohozaev_residual": record.pohozaev_residual,
        "mass_error": record.mass_error, "solver": record.solver,
        "iterations": record.iterations, "seed": record.seed,
        "kinetic": record.kinetic, "extra": jsonable(record.extra),
    }


def write_solution(record: SolutionRecord, directory, stem: str | None = None) -> Path:
    """Write `<stem>.csv` and `<stem>.json`; stem defaults to solution_<nodes>."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or f"solution_{record.nodes}"
    csv_path = directory / f"{stem}.csv"
    np.savetxt(csv_path, np.column_stack((record.grid.nodes, record.values)), fmt="%.17g",
               delimiter=",", header=",".join(PROFILE_COLUMNS), comments="")
    dump_json(record_summary(record), directory / f"{stem}.json")
    return csv_path


def read_profile(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = [c.strip() for c in fh.readline().strip().split(",")]
    for col in PROFILE_COLUMNS:
        if col not in header:
            raise MalformedFile(f"{path}: missing column {col!r} (header: {','.join(header)})")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    if data.shape[1] != len(header):
        raise MalformedFile(f"{path}: {data.shape[1]} columns in the body, {len(header)} in the header")
    return data[:, header.index("r")], data[:, header.index("u")]


def read_solution(path) -> SolutionRecord:
    """Rebuild a record from `<stem>.csv` and its sibling `<stem>.json`."""
    path = Path(path)
    meta_path = path.with_suffix(".json")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{meta_path}: {exc}") from exc
    missing = [k for k in SUMMARY_FIELDS if k not in meta]
    if missing:
        raise MalformedFile(f"{meta_path}: missing field(s) {', '.join(missing)}")
    r, u = read_profile(path)
    grid = rc.make_grid(meta["N"], meta["R"], meta["M"])
    if r.shape != grid.nodes.shape or not np.array_equal(r, grid.nodes):
        raise MalformedFile(f"{path}: radii do not match the grid N={meta['N']}, "
                            f"R={meta['R']}, M={meta['M']}")
    nl = validate_powers(meta["N"], [tuple(t) for t in meta["terms"]])

    def num(key):
        v = meta.get(key)
        return math.nan if v is None else float(v)

    return SolutionRecord(
        field=rc.RadialField(grid, u), nonlinearity=nl, lam=num("lambda"),
        energy=num("energy"), nodes=int(meta["nodes"]), residual=num("residual"),
        pohozaev_residual=num("pohozaev_residual"), mass_error=num("mass_error"),
        solver=meta["solver"], iterations=int(meta["iterations"]), kinetic=num("kinetic"),
        seed=meta["seed"], extra=meta.get("extra", {}))


def records_equal(a: SolutionRecord, b: SolutionRecord) -> bool:
    """Bitwise equality of every real in two records (NaN equal to NaN)."""
    def same(x, y):
        return np.array_equal(np.asarray(x, dtype=float).view(np.uint64),
                              np.asarray(y, dtype=float).view(np.uint64))
    scalars = ("lam", "energy", "residual", "pohozaev_residual", "mass_error", "kinetic")
    return (same(a.grid.nodes, b.grid.nodes) and same(a.values, b.values)
            and all(same(getattr(a, k), getattr(b, k)) for k in scalars)
            and a.nodes == b.nodes and a.solver == b.solver and a.iterations == b.iterations
            and a.seed == b.seed and a.nonlinearity.terms == b.nonlinearity.terms)
