"""Radial shooting for -Lap u - g(u) = lambda u.

In radial form the equation reads u'' + (N-1)/r u' + lambda u + g(u) = 0 with
u(0) = a, u'(0) = 0.  For lambda < 0 this is a particle in the potential
V(u) = G(u) + lambda u^2 / 2 with friction (N-1)/r, so the mechanical energy
E = u'^2/2 + V(u) never increases.  u = 0 is a hilltop of V; once E < 0 the
trajectory can no longer reach it and is trapped in one well.  A decaying
solution with n nodes is the boundary between amplitudes whose trajectories
are trapped after n crossings and those that cross a (n+1)-th time.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import kve

from .. import radial_core as rc
from ..nonlinearity import PowerSumNonlinearity, validate_powers
from . import _dopri
from .gridding import auto_grid
from .newton import newton_refine
from .records import ConvergenceError, SolverError, Tolerances, make_record

log = logging.getLogger(__name__)

RTOL = 1e-11
ATOL_REL = 1e-14


@dataclass(frozen=True)
class ShootingOutcome:
    classification: str  # "undershoot", "overshoot" or "decay"
    nodes: int
    exit_radius: float
    terminal_value: float


class _Trajectory:
    """One integrated trajectory with Hermite dense output of (u, u', mass)."""

    def __init__(self, status, crossings, rs, ys, fs):
        self.status = int(status)
        self.crossings = crossings
        self.t, self._ys, self._fs = rs, ys, fs

    @property
    def y_end(self):
        return self._ys[-1]

    def sol(self, r, comp=0):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return _dopri.hermite_eval(r, self.t, self._ys, self._fs, comp)


def _start(N, nl, lam, a):
    """Initial radius and state from the regular expansion u = a - (lambda a + g(a)) r^2 / (2N)."""
    curv = (lam * a + float(nl.g(a))) / N
    scale = 1.0 / math.sqrt(max(abs(lam), abs(curv / a), 1e-300))
    r0 = 1e-5 * scale
    return r0, np.array([a - curv * r0**2 / 2, -curv * r0, a * a * r0**N / N])


def _integrate(N, nl, lam, a, r_max, max_crossings=None, dense=False):
    """Integrate from the origin until trapped, max_crossings sign changes, or r_max.

    Returns (trajectory or None, r0, y0); None means the start is already trapped.
    """
    r0, y0 = _start(N, nl, lam, a)
    if 0.5 * y0[1] ** 2 + float(nl.G(y0[0])) + 0.5 * lam * y0[0] ** 2 <= 0:
        return None, r0, y0
    atol = np.array([ATOL_REL * a, ATOL_REL * a * math.sqrt(-lam + 1e-300),
                     ATOL_REL * a * a * r0 ** N])
    status, cross, rs, ys, fs = _dopri.integrate(
        float(N), float(lam), nl.coefficients, nl.exponents, r0, y0, float(r_max),
        -1 if max_crossings is None else int(max_crossings), RTOL, atol, bool(dense))
    if status < 0:
        raise SolverError("radial integration failed: step size underflow", lam=lam, amplitude=a)
    return _Trajectory(status, cross, rs, ys, fs), r0, y0


def _count(sol) -> int:
    return 0 if sol is None else len(sol.crossings)


def shoot(N: int, nl: PowerSumNonlinearity, lam: float, a: float, r_max: float,
          n_target: int = 0, decay_tol: float = 1e-6) -> ShootingOutcome:
    """Classify the trajectory from u(0) = a relative to an n_target-node decaying profile.

    overshoot: more than n_target sign changes.  undershoot: trapped in a well
    after at most n_target sign changes.  decay: |u| drops below decay_tol*a
    after the last sign change with log-slope within 10% of -sqrt(-lambda).
    """
    if not lam < 0:
        raise ValueError("shooting needs lambda < 0; no decaying solutions otherwise")
    if not a > 0:
        raise ValueError("central amplitude must be positive")
    sol, r0, y0 = _integrate(N, nl, lam, a, r_max, max_crossings=n_target + 1, dense=True)
    if sol is None:
        return ShootingOutcome("undershoot", 0, r0, y0[0])
    nodes = _count(sol)
    if nodes > n_target:
        return ShootingOutcome("overshoot", nodes, float(sol.crossings[-1]), 0.0)
    start = float(sol.crossings[-1]) if nodes else float(sol.t[0])
    r = np.linspace(start, float(sol.t[-1]), 4001)
    u, v = sol.sol(r, 0), sol.sol(r, 1)
    small = np.flatnonzero(np.abs(u) < decay_tol * a)
    kappa = math.sqrt(-lam)
    if small.size:
        i = small[0]
        slope = v[i] / u[i] if u[i] != 0 else -math.inf
        if abs(slope / kappa + 1) < 0.1 + (N - 1) / (2 * kappa * r[i]):
            return ShootingOutcome("decay", nodes, float(r[i]), float(u[i]))
    return ShootingOutcome("undershoot", nodes, float(sol.t[-1]), float(sol.y_end[0]))


def _potential_zero(nl, lam) -> float:
    """Amplitude where V(a) = G(a) + lambda a^2/2 changes sign."""
    def h(x):
        return float(nl.G(x)) / x**2 + lam / 2
    hi = 1.0
    while h(hi) <= 0:
        hi *= 2
    lo = hi / 2
    while h(lo) > 0:
        lo /= 2
    return brentq(h, lo, hi, rtol=1e-14)


def bisect_amplitude(N, nl, lam, n, r_max, rtol=1e-13, max_iter=200) -> tuple[float, float]:
    """Amplitudes (a_lo, a_hi) straddling the n-node decaying profile."""
    if not lam < 0:
        raise ValueError("shooting needs lambda < 0")
    a_lo = _potential_zero(nl, lam)
    a_hi = 1.5 * a_lo
    for _ in range(200):
        sol, *_ = _integrate(N, nl, lam, a_hi, r_max, max_crossings=n + 1)
        if _count(sol) > n:
            break
        a_lo, a_hi = a_hi, a_hi * 1.5
    else:
        raise SolverError("no overshooting amplitude found", lam=lam, n=n)
    for _ in range(max_iter):
        if a_hi - a_lo <= rtol * a_hi:
            break
        mid = 0.5 * (a_lo + a_hi)
        sol, *_ = _integrate(N, nl, lam, mid, r_max, max_crossings=n + 1)
        if _count(sol) > n:
            a_hi = mid
        else:
            a_lo = mid
    return a_lo, a_hi


@dataclass(frozen=True)
class ShootingProfile:
    """Decaying n-node profile: ODE solution on [0, r_cut] and a linear Bessel tail beyond."""

    dimension: int
    lam: float
    amplitude: float
    nodes: int
    r_cut: float
    mass: float
    _sol: object = field(repr=False)
    _r0: float = field(repr=False)

    def _tail(self, r):
        N, kappa = self.dimension, math.sqrt(-self.lam)
        nu = N / 2 - 1
        rc_ = self.r_cut
        shape = (r / rc_) ** (1 - N / 2) * kve(nu, kappa * r) / kve(nu, kappa * rc_)
        return self._sol.sol(rc_)[0] * shape * np.exp(-kappa * (r - rc_))

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner_ = r <= self.r_cut
        out[inner_] = self._sol.sol(np.maximum(r[inner_], self._r0))
        out[~inner_] = self._tail(r[~inner_])
        return out

    @property
    def zeros(self) -> np.ndarray:
        return np.asarray(self._sol.crossings[:self.nodes])


def shooting_profile(N: int, nl: PowerSumNonlinearity, lam: float, n: int,
                     r_max: float | None = None, sep_tol: float = 1e-6) -> ShootingProfile:
    """Bisect the amplitude, then splice the trajectory onto its linear tail.

    The trajectories from a_lo and a_hi agree until the growing mode takes
    over; the profile is cut where they first differ by sep_tol relative,
    past the peak of the last lobe.
    """
    kappa = math.sqrt(-lam)
    if r_max is None:
        r_max = (60.0 + 20.0 * n) / kappa
    a_lo, a_hi = bisect_amplitude(N, nl, lam, n, r_max)
    lo, r0, _ = _integrate(N, nl, lam, a_lo, r_max, max_crossings=None, dense=True)
    hi, *_ = _integrate(N, nl, lam, a_hi, r_max, max_crossings=n + 1, dense=True)
    if lo is None or hi is None or _count(lo) != n:
        raise SolverError("amplitude bisection did not isolate an n-node profile",
                          lam=lam, n=n, amplitudes=(a_lo, a_hi))
    start = float(lo.crossings[n - 1]) if n else r0
    end = min(float(lo.t[-1]), float(hi.t[-1]))
    r = np.linspace(start, end, 20001)
    u_lo, u_hi = lo.sol(r), hi.sol(r)
    peak = int(np.argmax(np.abs(u_lo)))
    apart = np.flatnonzero(np.abs(u_lo[peak:] - u_hi[peak:]) > sep_tol * np.abs(u_lo[peak:]))
    r_cut = float(r[peak + apart[0]]) if apart.size else end
    prof = ShootingProfile(N, lam, a_lo, n, r_cut, 0.0, lo, r0)
    tail_mass = quad(lambda x: prof._tail(np.array([x]))[0] ** 2 * x ** (N - 1),
                     r_cut, r_cut + 50 / kappa, limit=200)[0]
    mass = rc.sphere_area(N) * (float(lo.sol(r_cut, 2)[0]) + tail_mass)
    return ShootingProfile(N, lam, a_lo, n, r_cut, mass, lo, r0)


@dataclass
class MassSolve:
    lam: float
    profile: ShootingProfile
    table: list[tuple[float, float]]


def solve_unit_mass(N: int, nl: PowerSumNonlinearity, n: int, lam_range=(1e-2, 1e8),
                    lam_start: float = 1.0, n_scan: int = 41, xtol: float = 1e-11) -> MassSolve:
    """Find lambda < 0 with |u_lambda|_2 = 1 for the n-node profile.

    A geometric walk from lam_start looks for a sign change of log m(lambda);
    failing that, a log-spaced scan over lam_range.  Monotonicity of m is not
    assumed, and every evaluated (lambda, m) pair is kept in the table.
    """
    table: list[tuple[float, float]] = []
    cache: dict[float, ShootingProfile] = {}
    lo_lim, hi_lim = math.log(lam_range[0]), math.log(lam_range[1])

    def f(x):
        prof = shooting_profile(N, nl, -math.exp(x), n)
        cache[x] = prof
        table.append((prof.lam, prof.mass))
        return math.log(prof.mass)

    bracket = None
    x = min(max(math.log(lam_start), lo_lim), hi_lim)
    fx = f(x)
    step = math.log(4.0) if fx > 0 else -math.log(4.0)
    worse = 0
    while lo_lim <= x + step <= hi_lim and worse < 3:
        x_new = x + step
        f_new = f(x_new)
        if f_new == 0 or (f_new > 0) != (fx > 0):
            bracket = (x, x_new, fx, f_new)
            break
        worse = worse + 1 if abs(f_new) > abs(fx) else 0
        x, fx = x_new, f_new
    if bracket is None:
        log.info("mass walk found no bracket for n=%d; scanning %s", n, lam_range)
        xs = np.linspace(lo_lim, hi_lim, n_scan)
        fs = [f(xi) for xi in xs]
        for i in range(n_scan - 1):
            if fs[i] == 0 or (fs[i] > 0) != (fs[i + 1] > 0):
                bracket = (xs[i], xs[i + 1], fs[i], fs[i + 1])
                break
    if bracket is None:
        raise ConvergenceError(f"no unit-mass bracket for the {n}-node branch",
                               table=sorted(table))
    x0, x1, f0, f1 = bracket
    if f0 == 0:
        root = x0
    elif f1 == 0:
        root = x1
    else:
        root = brentq(f, min(x0, x1), max(x0, x1), xtol=xtol)
    prof = cache.get(root) or shooting_profile(N, nl, -math.exp(root), n)
    return MassSolve(prof.lam, prof, sorted(table))


def excited_state(grid: rc.RadialGrid | None, nl: PowerSumNonlinearity, n_target: int,
                  tol: Tolerances = Tolerances(), lam_range=(1e-2, 1e8), seed=None,
                  deflated=()):
    """Unit-mass radial solution with n_target nodes, polished by Newton on the grid.

    With grid=None the grid is sized from the shot profile (see gridding).
    """
    if n_target < 0:
        raise ValueError("n_target must be >= 0")
    N = nl.dimension
    if grid is not None and grid.dimension != N:
        raise ValueError("grid dimension differs from the nonlinearity's")
    ms = solve_unit_mass(N, nl, n_target, lam_range=lam_range)
    if grid is None:
        zeros = ms.profile.zeros
        grid = auto_grid(N, nl, ms.lam, ms.profile.amplitude,
                         float(zeros[-1]) if zeros.size else 0.0, tol_residual=tol.residual)
    u = ms.profile(grid.nodes)
    u[-1] = 0.0
    u /= rc.l2_norm(grid, u)
    rec = newton_refine(grid, nl, u, ms.lam, deflated=deflated, tol=tol, seed=seed,
                        solver="shooting", shooting_lambda=ms.lam, mass_table=ms.table)
    if rec.nodes != n_target:
        raise SolverError(f"Newton polish moved the {n_target}-node profile to "
                          f"{rec.nodes} nodes", record=rec)
    return rec


def oracle_homogeneous(N: int, p: float, grid: rc.RadialGrid | None, seed=None,
                       tol_residual: float = 1e-8):
    """Unit-mass solution for g(u) = |u|^{p-2} u by rescaling the lambda = -1 ground state.

    w solves -Lap w + w = w^{p-1}; u(x) = c w(d x) with d^2 = c^{p-2} solves the
    equation with lambda = -d^2, and |u|_2^2 = c^2 d^{-N} |w|_2^2 = 1 gives
    c = |w|_2^{4/(N(p-2)-4)}.  The field is the rescaled profile sampled on the
    grid; residuals are evaluated there, with no discrete correction.  With
    grid=None the grid is sized from the rescaled amplitude and multiplier.
    """
    nl = validate_powers(N, [(1.0, p)])
    if grid is not None and grid.dimension != N:
        raise ValueError("grid dimension differs from N")
    w = shooting_profile(N, nl, -1.0, 0)
    c = w.mass ** (2.0 / (N * (p - 2) - 4))
    d = c ** ((p - 2) / 2)
    if grid is None:
        grid = auto_grid(N, nl, -d * d, c * w.amplitude, tol_residual=tol_residual)
    u = c * w(d * grid.nodes)
    u[-1] = 0.0
    return make_record(grid, nl, u, -d * d, "shooting", 0, seed=seed,
                       w_amplitude=w.amplitude, w_mass=w.mass, scale_c=c, scale_d=d)
