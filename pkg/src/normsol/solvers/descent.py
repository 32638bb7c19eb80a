"""Ground state by descent on the fiber-maximized energy E(u) = max_s J(s*u) over the unit sphere."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solveh_banded

from .. import radial_core as rc
from ..energy import constrained_grad, fiber_max, moments, stretched_J
from ..nonlinearity import PowerSumNonlinearity
from .gridding import auto_grid, resample
from .newton import newton_refine
from .records import ConvergenceError, SolverError, Tolerances

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DescentOptions:
    max_iter: int = 2000
    grad_tol: float = 1e-5        # relative to 1 + |lambda_u|; Newton takes over below this
    handoff_tol: float = 1.0      # hand over to Newton on stagnation once the gradient is below this
    patience: int = 50
    armijo: float = 1e-4
    max_halvings: int = 40
    dilate_tol: float = 1e-8      # dilate the grid profile only when |s*| exceeds this
    seed: int | None = None
    perturbation: float = 0.0     # relative amplitude of seeded noise on the initial guess
    initial: np.ndarray | None = None


def _gaussian_width(N: int, nl: PowerSumNonlinearity) -> float:
    # unit-mass Gaussian of width 1: u = pi^{-N/4} exp(-r^2/2)
    A = N / 2
    B = np.array([math.pi ** (-N * p / 4) * (2 * math.pi / p) ** (N / 2) for p in nl.exponents])
    return math.exp(-fiber_max(A, B, nl))


def gaussian_guess(grid: rc.RadialGrid, nl: PowerSumNonlinearity) -> np.ndarray:
    """Unit-mass Gaussian whose width puts it on the Pohozaev manifold (s* = 0).

    For a Gaussian of width sigma, A and B_i are known in closed form, so the
    width is set analytically and then sampled.
    """
    sigma = _gaussian_width(grid.dimension, nl)
    u = np.exp(-0.5 * (grid.nodes / sigma) ** 2)
    u[-1] = 0.0
    return u / rc.l2_norm(grid, u)


class _Fiber:
    """E(u) = J(s*(u) * u) and its exact gradient on the grid."""

    def __init__(self, grid, nl):
        self.grid, self.nl = grid, nl

    def __call__(self, u):
        A = rc.grad_l2_sq(self.grid, u)
        B = moments(self.grid, self.nl, u)
        s = fiber_max(A, B, self.nl)
        return stretched_J(A, B, self.nl, s), s

    def gradient(self, u, s):
        # envelope theorem: differentiate J(s*u) in u at fixed s = s*(u)
        nl = self.nl
        au = np.abs(u)
        nonlin = sum(a * math.exp(th * s) * au ** (p - 2)
                     for (a, p), th in zip(nl.terms, nl.dilation_rates)) * u
        grad = -math.exp(2 * s) * rc.laplacian(self.grid, u) - nonlin
        grad[-1] = 0.0
        return grad


COARSE_COUNT = 3000
COARSE_WIDTHS = 30.0


def _descend(grid, nl, opts: DescentOptions):
    """Projected descent on E; returns (u, lambda_u, iterations)."""
    if opts.initial is not None:
        u = np.array(opts.initial, dtype=float)
        u[-1] = 0.0
    else:
        u = gaussian_guess(grid, nl)
    if opts.perturbation:
        rng = np.random.default_rng(opts.seed)
        u[:-1] *= 1 + opts.perturbation * rng.standard_normal(u.size - 1)
    u /= rc.l2_norm(grid, u)

    fiber = _Fiber(grid, nl)
    w = grid.weights[:-1]
    kd, ko = rc.stiffness_bands(grid)
    E, s = fiber(u)
    tau = 1.0
    lam = gnorm = math.nan
    best, best_it = math.inf, 0
    it = 0
    for it in range(opts.max_iter):
        cg, lam = constrained_grad(grid, nl, u)
        gnorm = rc.l2_norm(grid, cg) / (1 + abs(lam))
        if gnorm < opts.grad_tol:
            break
        if gnorm < 0.5 * best:
            best, best_it = gnorm, it
        elif best < opts.handoff_tol and it - best_it > opts.patience:
            # E is minimized with the exact dilation law while grid solutions
            # satisfy it only up to O(h^2), so the constrained gradient
            # plateaus at that level; Newton takes it from here
            break
        if abs(s) > opts.dilate_tol:
            u = rc.dilate(grid, u, max(-0.5, min(0.5, s)))
            u /= rc.l2_norm(grid, u)
            E, s = fiber(u)
            continue
        grad = fiber.gradient(u, s)
        mu = rc.inner(grid, grad, u)
        if rc.l2_norm(grid, grad - mu * u) < opts.grad_tol * (1 + abs(mu)):
            break
        sigma = max(-mu, 1.0)
        ab = np.zeros((2, w.size))
        ab[0, 1:] = math.exp(2 * s) * ko
        ab[1] = math.exp(2 * s) * kd + sigma * w
        pg, pu = solveh_banded(ab, np.column_stack((w * grad[:-1], w * u[:-1])),
                               check_finite=False).T
        d = np.zeros_like(u)
        d[:-1] = pg - (np.dot(w, u[:-1] * pg) / np.dot(w, u[:-1] * pu)) * pu
        slope = rc.inner(grid, grad, d)
        if slope <= 0:
            break
        tau = min(1.0, 2 * tau)
        for _ in range(opts.max_halvings):
            trial = u - tau * d
            trial /= rc.l2_norm(grid, trial)
            E_new, s_new = fiber(trial)
            if E_new <= E - opts.armijo * tau * slope:
                break
            tau /= 2
        else:
            if abs(E_new - E) <= 1e-13 * abs(E):
                break
            raise SolverError("line search failed", iteration=it, energy=E, step=tau)
        u, E, s = trial, E_new, s_new
    else:
        raise ConvergenceError(f"fiber descent did not converge in {opts.max_iter} iterations",
                               energy=E, lam=lam, gradient=gnorm)
    log.debug("fiber descent stopped after %d iterations, E = %.12g", it, E)
    return u, lam, it


def ground_state(grid: rc.RadialGrid | None, nl: PowerSumNonlinearity,
                 opts: DescentOptions = DescentOptions(), tol: Tolerances = Tolerances()):
    """Minimize E on the unit sphere, then polish with Newton on the grid.

    Each iteration dilates the profile onto the Pohozaev manifold when it has
    drifted (|s*| > dilate_tol), then takes one preconditioned projected
    gradient step with Armijo backtracking on E.  The preconditioner is
    (e^{2s*}(-Lap) + sigma)^{-1} with sigma = max(-lambda_u, 1).

    With grid=None the descent runs on a coarse grid scaled to the initial
    Gaussian, and the Newton polish on a grid sized from the coarse result.
    """
    if grid is not None and grid.dimension != nl.dimension:
        raise ValueError("grid dimension differs from the nonlinearity's")
    if grid is None:
        width = _gaussian_width(nl.dimension, nl)
        coarse = rc.make_grid(nl.dimension, COARSE_WIDTHS * width, COARSE_COUNT)
        if opts.initial is not None:
            raise ValueError("an initial profile needs an explicit grid")
        u, lam, it = _descend(coarse, nl, opts)
        if not lam < 0:
            raise SolverError("coarse descent ended with lambda_u >= 0", lam=lam)
        grid = auto_grid(nl.dimension, nl, lam, float(np.max(np.abs(u))),
                         tol_residual=tol.residual)
        u = resample(coarse, u, grid)
        u /= rc.l2_norm(grid, u)
    else:
        u, lam, it = _descend(grid, nl, opts)
    rc.check_leakage(grid, u)
    rec = newton_refine(grid, nl, u, lam, tol=tol, seed=opts.seed, solver="fiber_descent",
                        descent_iterations=it)
    return replace(rec, iterations=it + rec.iterations)
