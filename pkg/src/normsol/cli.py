"""Command-line entry point: solve, oracle, diagnostics and sweep runs."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import radial_core as rc
from .config import COMMANDS, ConfigError, RunConfig, config_from_dict, parse_config
from .io import dump_json, jsonable, record_summary, write_solution
from .minmax import build_hierarchy, minmax_report
from .nonlinearity import validate_powers
from .solvers import (DescentOptions, SolutionRejected, SolverError, excited_state, ground_state,
                      oracle_homogeneous, violations)

log = logging.getLogger("normsol")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
MONOTONE_SLACK = 1e-12


def _error_record(exc: Exception, **context) -> dict:
    rec = {"type": type(exc).__name__, "message": str(exc), **context}
    details = getattr(exc, "details", None)
    if details:
        rec["details"] = {k: v for k, v in details.items() if k != "record"}
    return jsonable(rec)


def _grid(cfg: RunConfig):
    return rc.make_grid(cfg.dimension, cfg.radius, cfg.count) if cfg.grid == "fixed" else None


def _solve_one(cfg: RunConfig, nl, n: int):
    tol = cfg.tolerances
    if n == 0:
        opts = DescentOptions(max_iter=cfg.max_iter, seed=cfg.seed)
        return ground_state(_grid(cfg), nl, opts, tol)
    return excited_state(_grid(cfg), nl, n, tol, seed=cfg.seed)


def run_solve(cfg: RunConfig, out: Path) -> int:
    nl = validate_powers(cfg.dimension, cfg.terms)
    entries, errors = [], []
    for n in cfg.node_targets:
        log.info("solving for %d node(s)", n)
        try:
            rec = _solve_one(cfg, nl, n)
            problems = []
        except SolutionRejected as exc:
            rec, problems = exc.record, exc.violations
        except (SolverError, ValueError) as exc:
            log.error("node target %d failed: %s", n, exc)
            errors.append(_error_record(exc, node_target=n))
            continue
        stem = f"solution_{n}"
        write_solution(rec, out, stem)
        entries.append({"node_target": n, "file": f"{stem}.csv", "accepted": not problems,
                        "violations": problems, **record_summary(rec)})
        if problems:
            log.error("node target %d rejected: %s", n, "; ".join(problems))
        if rec.nodes != n:
            errors.append({"type": "NodeMismatch", "node_target": n, "nodes": rec.nodes,
                           "message": f"record has {rec.nodes} nodes, requested {n}"})
    ok = not errors and all(e["accepted"] for e in entries)
    dump_json({"command": "solve", "config": cfg.to_dict(include_output=False),
               "status": "ok" if ok else "failed", "solutions": entries, "errors": errors},
              out / "summary.json")
    return EXIT_OK if ok else EXIT_FAILED


def run_oracle(cfg: RunConfig, out: Path) -> int:
    if len(cfg.terms) != 1 or cfg.terms[0][0] != 1.0:
        raise ConfigError(["oracle needs a single term with coefficient 1, e.g. [[1, 4]]"])
    p = cfg.terms[0][1]
    rec = oracle_homogeneous(cfg.dimension, p, _grid(cfg), seed=cfg.seed,
                             tol_residual=cfg.tol_residual)
    problems = violations(rec, cfg.tolerances)
    write_solution(rec, out, "oracle")
    ok = not problems
    dump_json({"command": "oracle", "config": cfg.to_dict(include_output=False),
               "status": "ok" if ok else "failed",
               "solutions": [{"file": "oracle.csv", "accepted": ok, "violations": problems,
                              **record_summary(rec)}], "errors": []},
              out / "summary.json")
    if problems:
        log.error("oracle record fails validation: %s", "; ".join(problems))
    return EXIT_OK if ok else EXIT_FAILED


def run_diagnostics(cfg: RunConfig, out: Path) -> int:
    nl = validate_powers(cfg.dimension, cfg.terms)
    grid = rc.make_grid(cfg.dimension, cfg.hierarchy_radius, cfg.count)
    hier = build_hierarchy(grid, cfg.modes)
    seeds = np.random.SeedSequence(cfg.seed).spawn(max(cfg.levels))
    reports = []
    for n in sorted(set(cfg.levels)):
        log.info("min-max diagnostics at level %d", n)
        rep = minmax_report(grid, nl, hier, n, cfg.samples,
                            seed=int(seeds[n - 1].generate_state(1)[0]), starts=cfg.starts)
        reports.append(rep.as_dict())
    problems = []
    for key in ("violations", "definitional_violations", "barrier_violations"):
        total = sum(r[key] for r in reports)
        if total:
            problems.append(f"{total} {key.replace('_', ' ')}")
    for key in ("mu_alpha", "mu_beta"):
        vals = [r[key] for r in reports]
        if any(b < a * (1 - MONOTONE_SLACK) for a, b in zip(vals, vals[1:])):
            problems.append(f"{key} is not nondecreasing in n")
    growth = {}
    by_level = {r["level"]: r for r in reports}
    if 1 in by_level and 8 in by_level:
        for key in ("mu_alpha", "mu_beta"):
            growth[key] = by_level[8][key] / by_level[1][key]
            if not growth[key] > 2:
                problems.append(f"{key}: level 8 / level 1 = {growth[key]:.4g} is not > 2")
    rho = [r["rho_n"] for r in reports]
    dump_json({"command": "diagnostics", "config": cfg.to_dict(include_output=False),
               "hierarchy": reports[0]["hierarchy"] if reports else {},
               "levels": reports, "rho_n": rho,
               "rho_increasing": all(b > a for a, b in zip(rho, rho[1:])),
               "growth_ratio": growth, "status": "ok" if not problems else "failed",
               "problems": problems},
              out / "minmax_report.json")
    for p in problems:
        log.error("diagnostics: %s", p)
    return EXIT_OK if not problems else EXIT_FAILED


def _sweep_worker(args):
    raw, out = args
    logging.getLogger("normsol").setLevel(logging.WARNING)
    cfg = config_from_dict(raw)
    return run(replace(cfg, output=str(out)))


def run_sweep(cfg: RunConfig, out: Path) -> int:
    base = {k: v for k, v in cfg.to_dict().items() if k not in ("sweep", "command")}
    jobs = []
    for i, entry in enumerate(cfg.sweep):
        run_dir = out / f"run_{i:03d}"
        jobs.append(({**base, **entry, "output": str(run_dir)}, run_dir))
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        codes = list(pool.map(_sweep_worker, jobs))
    index = [{"run": i, "directory": f"run_{i:03d}", "overrides": entry,
              "command": entry.get("command", "solve"), "exit_status": code}
             for i, (entry, code) in enumerate(zip(cfg.sweep, codes))]
    ok = all(c == EXIT_OK for c in codes)
    dump_json({"command": "sweep", "status": "ok" if ok else "failed", "runs": index},
              out / "sweep_index.json")
    return EXIT_OK if ok else EXIT_FAILED


HANDLERS = {"solve": run_solve, "oracle": run_oracle, "diagnostics": run_diagnostics,
            "sweep": run_sweep}


def run(cfg: RunConfig) -> int:
    """Execute a validated config; artifacts go to cfg.output."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return HANDLERS[cfg.command](cfg, out)
    except ConfigError as exc:
        dump_json({"type": "ConfigError", "errors": exc.errors}, out / "error.json")
        log.error("%s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # any failure becomes a machine-readable record
        dump_json({**_error_record(exc, command=cfg.command),
                   "traceback": traceback.format_exc()}, out / "error.json")
        log.error("%s failed: %s", cfg.command, exc)
        return EXIT_FAILED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="normsol", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="random seed (overrides the config)")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text()
        parse_config(text)
        raw = json.loads(text)
        if raw.get("command", args.command) != args.command:
            raise ConfigError([f"config command {raw['command']!r} differs from "
                               f"the subcommand {args.command!r}"])
        raw["command"] = args.command
        if args.out is not None:
            raw["output"] = args.out
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = config_from_dict(raw)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            dump_json({"type": "ConfigError", "errors": exc.errors}, Path(args.out) / "error.json")
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
