"""Bordered Newton iteration for (-Lap_h u - g(u) - lambda u = 0, |u|_2^2 = 1) with deflation."""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .. import radial_core as rc
from ..nonlinearity import PowerSumNonlinearity
from .records import (ConvergenceError, SolutionRecord, SolverError, Tolerances, accept,
                      make_record)

DEFLATION_SHIFT = 1.0


def _deflation_log_derivative(grid, u, du, known) -> float:
    """(d/de) log eta(u + e du) at e = 0 for eta = prod_k (shift + 1/|u - u_k|^2)."""
    total = 0.0
    for v in known:
        diff = u - v
        D = rc.inner(grid, diff, diff)
        dD = 2 * rc.inner(grid, diff, du)
        total += -dD / (D * D) / (DEFLATION_SHIFT + 1 / D)
    return total


def newton_refine(grid: rc.RadialGrid, nl: PowerSumNonlinearity, guess, lambda_guess: float,
                  deflated=(), tol: Tolerances = Tolerances(), max_iter: int = 50,
                  seed=None, solver: str = "newton", **extra) -> SolutionRecord:
    """Polish (u, lambda) to a discrete solution on the unit sphere.

    The residual rows are multiplied by the cell weights, which makes the
    Jacobian K - W(g'(u) + lambda) symmetric tridiagonal; the border from the
    mass constraint is eliminated with two banded solves per step.  Known
    solutions in `deflated` are repelled by the factor prod_k (1 + 1/|u-u_k|^2),
    applied as the usual rescaling of the undeflated Newton step.
    """
    u = np.array(guess, dtype=float)
    if u.shape != (grid.size,):
        raise ValueError("guess does not match the grid")
    u[-1] = 0.0
    if abs(rc.inner(grid, u, u) - 1) >= 0.1:
        raise ValueError("initial guess must be roughly normalized (mass error < 0.1)")
    lam = float(lambda_guess)
    known = [np.asarray(getattr(d, "values", d), dtype=float) for d in deflated]
    omega = grid.sphere_area
    w = grid.weights[:-1]
    kd, ko = rc.stiffness_bands(grid)
    res_tol = tol.residual * (1 + abs(lam))

    it = 0
    for it in range(1, max_iter + 1):
        x = u[:-1]
        F1 = w * (-rc.laplacian(grid, u)[:-1] - nl.g(x) - lam * x)
        F2 = 0.5 * (omega * np.dot(w, x * x) - 1)
        ab = np.zeros((3, x.size))
        ab[0, 1:] = ko
        ab[1] = kd - w * (nl.dg(x) + lam)
        ab[2, :-1] = ko
        wu = w * x
        rhs = np.column_stack((-F1, wu))
        try:
            sol = solve_banded((1, 1), ab, rhs, check_finite=False)
        except LinAlgError as exc:
            raise SolverError("singular Jacobian in Newton step", condition=math.inf,
                              iteration=it) from exc
        norm_T = float(np.max(np.abs(ab).sum(axis=0)))
        cond = norm_T * max(np.abs(sol[:, 0]).sum() / max(np.abs(F1).sum(), 1e-300),
                            np.abs(sol[:, 1]).sum() / max(np.abs(wu).sum(), 1e-300))
        if not np.all(np.isfinite(sol)) or cond > 1e15:
            raise SolverError("singular Jacobian in Newton step", condition=cond, iteration=it)
        x1, x2 = sol[:, 0], sol[:, 1]
        dlam = (-F2 - omega * np.dot(wu, x1)) / (omega * np.dot(wu, x2))
        du = np.zeros_like(u)
        du[:-1] = x1 + dlam * x2
        if known:
            scale = 1.0 - _deflation_log_derivative(grid, u, du, known)
            du /= scale
            dlam /= scale
        u = u + du
        lam += dlam
        if not (np.all(np.isfinite(u)) and math.isfinite(lam)):
            raise ConvergenceError("Newton iteration diverged", iteration=it)
        res_tol = tol.residual * (1 + abs(lam))
        step = rc.l2_norm(grid, du)
        residual = rc.l2_norm(grid, -rc.laplacian(grid, u) - nl.g(u) - lam * u)
        mass_err = abs(rc.inner(grid, u, u) - 1)
        if (residual < 0.1 * res_tol and mass_err < 0.1 * tol.mass) or step < 1e-14:
            break
        if residual > 1e12 * (1 + abs(lam)):
            raise ConvergenceError("Newton iteration diverged", iteration=it, residual=residual)
    else:
        raise ConvergenceError(f"Newton did not converge in {max_iter} iterations",
                               residual=residual, lam=lam)

    for v in known:
        dist = rc.l2_norm(grid, u - v)
        if dist < 1e-6:
            raise SolverError("Newton converged to a deflated solution", distance=dist)
    rec = make_record(grid, nl, u, lam, solver, it, seed=seed, **extra)
    return accept(rec, tol)
