"""Solution records, acceptance thresholds and node counting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import radial_core as rc
from ..energy import energy_J, gradient_J
from ..nonlinearity import PowerSumNonlinearity

SOLVERS = ("fiber_descent", "shooting", "newton")


class SolverError(RuntimeError):
    """A solve failed; `details` carries diagnostics for the caller."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class ConvergenceError(SolverError):
    pass


class SolutionRejected(SolverError):
    def __init__(self, record: SolutionRecord, violations: list[str]):
        super().__init__("solution rejected: " + "; ".join(violations),
                         record=record, violations=violations)
        self.record = record
        self.violations = violations


@dataclass(frozen=True)
class Tolerances:
    """Acceptance thresholds.

    residual is scaled by (1 + |lambda|) and pohozaev by |grad u|_2^2;
    None disables the Pohozaev check.
    """

    residual: float = 1e-8
    mass: float = 1e-10
    pohozaev: float | None = 1e-6


@dataclass(frozen=True, eq=False)
class SolutionRecord:
    field: rc.RadialField
    nonlinearity: PowerSumNonlinearity
    lam: float
    energy: float
    nodes: int
    residual: float
    pohozaev_residual: float
    mass_error: float
    solver: str
    iterations: int
    kinetic: float = math.nan
    seed: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def grid(self) -> rc.RadialGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def negated(self) -> SolutionRecord:
        """The partner solution -u; every scalar is even in u."""
        return SolutionRecord(-self.field, self.nonlinearity, self.lam, self.energy, self.nodes,
                              self.residual, self.pohozaev_residual, self.mass_error,
                              self.solver, self.iterations, self.kinetic, self.seed, dict(self.extra))


def equation_residual(grid: rc.RadialGrid, nl: PowerSumNonlinearity, u, lam: float) -> np.ndarray:
    """-Lap u - g(u) - lambda u at the nodes (zero at the boundary)."""
    res = gradient_J(grid, nl, u) - lam * np.asarray(u)
    res[-1] = 0.0
    return res


def node_count(u, amplitude_tol: float | None = None) -> int:
    """Sign changes among samples with |u| above the tolerance (default 1e-7 max|u|)."""
    u = np.asarray(u, dtype=float)
    if amplitude_tol is None:
        amplitude_tol = 1e-7 * float(np.max(np.abs(u), initial=0.0))
    if amplitude_tol <= 0:
        if not np.any(u):
            return 0
        raise ValueError("amplitude_tol must be positive")
    signs = np.sign(u[np.abs(u) > amplitude_tol])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def make_record(grid: rc.RadialGrid, nl: PowerSumNonlinearity, u, lam: float, solver: str,
                iterations: int, seed: int | None = None, **extra) -> SolutionRecord:
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver tag {solver!r}")
    u = np.array(u, dtype=float)
    u[-1] = 0.0
    eb = energy_J(grid, nl, u)
    return SolutionRecord(
        field=rc.RadialField(grid, u),
        nonlinearity=nl,
        lam=float(lam),
        energy=eb.energy,
        nodes=node_count(u),
        residual=rc.l2_norm(grid, equation_residual(grid, nl, u, lam)),
        pohozaev_residual=abs(eb.pohozaev),
        mass_error=abs(rc.inner(grid, u, u) - 1.0),
        solver=solver,
        iterations=int(iterations),
        kinetic=eb.kinetic,
        seed=seed,
        extra=extra,
    )


def violations(record: SolutionRecord, tol: Tolerances = Tolerances()) -> list[str]:
    """Every acceptance threshold the record misses (recomputed from its field)."""
    grid, nl, u, lam = record.grid, record.nonlinearity, record.values, record.lam
    out = []
    mass_error = abs(rc.inner(grid, u, u) - 1.0)
    if not mass_error < tol.mass:
        out.append(f"mass error {mass_error:.3e} >= {tol.mass:g}")
    residual = rc.l2_norm(grid, equation_residual(grid, nl, u, lam))
    if not residual < tol.residual * (1 + abs(lam)):
        out.append(f"residual {residual:.3e} >= {tol.residual:g}*(1+|lambda|)")
    if tol.pohozaev is not None:
        eb = energy_J(grid, nl, u)
        if not abs(eb.pohozaev) < tol.pohozaev * eb.kinetic:
            out.append(f"Pohozaev residual {abs(eb.pohozaev):.3e} >= "
                       f"{tol.pohozaev:g}*|grad u|^2 = {tol.pohozaev * eb.kinetic:.3e}")
    if not lam < 0:
        out.append(f"lambda = {lam:g} is not negative")
    return out


def accept(record: SolutionRecord, tol: Tolerances = Tolerances()) -> SolutionRecord:
    problems = violations(record, tol)
    if problems:
        raise SolutionRejected(record, problems)
    return record


def l2_distance(a: SolutionRecord, b: SolutionRecord) -> float:
    if a.grid is not b.grid and (a.grid.size != b.grid.size or a.grid.radius != b.grid.radius
                                 or a.grid.dimension != b.grid.dimension):
        raise ValueError("records live on different grids")
    return rc.l2_norm(a.grid, a.values - b.values)
