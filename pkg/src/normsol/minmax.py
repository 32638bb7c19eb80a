"""Growth constants on a nested radial subspace hierarchy and the lower-bound chain for J.

The hierarchy is spanned by the first m eigenvectors of the discrete radial
Dirichlet Laplacian, i.e. the generalized problem K phi = kappa W phi built
from the same cell differences and weights as the energy.  In that basis

    |grad u|_2^2 = sum_j kappa_j c_j^2,   |u|_2^2 = sum_j c_j^2

hold exactly, so every inequality below is checked in one consistent
discretization.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import radial_core as rc
from .energy import energy_from_moments, moments
from .nonlinearity import PowerSumNonlinearity, h2_constant_K, lemma2_constant_L

log = logging.getLogger(__name__)

CHAIN_SLACK = 1e-10
BARRIER_SLACK = 0.05
BARRIER_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SubspaceHierarchy:
    grid: rc.RadialGrid
    basis: np.ndarray = field(repr=False)   # (m, M+1), rows orthonormal in L^2
    grad_sq: np.ndarray = field(repr=False)  # |grad phi_j|_2^2, increasing
    trunc: int

    @property
    def h1_norms(self) -> np.ndarray:
        """||phi_j||^2 = |grad phi_j|_2^2 + 1."""
        return self.grad_sq + 1.0

    def field(self, coeffs, start: int = 1) -> np.ndarray:
        """sum_j c_j phi_j with the coefficients applied from phi_start on."""
        coeffs = np.asarray(coeffs, dtype=float)
        return coeffs @ self.basis[start - 1:start - 1 + coeffs.size]


def build_hierarchy(grid: rc.RadialGrid, m: int) -> SubspaceHierarchy:
    if m < 1:
        raise ValueError("hierarchy needs at least one mode")
    if m > grid.count // 4:
        raise ValueError(f"m = {m} modes exceeds the resolution guard M/4 = {grid.count // 4}")
    kd, ko = rc.stiffness_bands(grid)
    s = 1.0 / np.sqrt(grid.weights[:-1])
    evals, vecs = eigh_tridiagonal(kd * s * s, ko * s[:-1] * s[1:], select="i",
                                   select_range=(0, m - 1))
    basis = np.zeros((m, grid.size))
    basis[:, :-1] = (vecs * s[:, None]).T / math.sqrt(grid.sphere_area)
    # fix the sign so each mode is positive at the origin
    basis *= np.sign(basis[:, :1])
    basis.flags.writeable = False
    return SubspaceHierarchy(grid, basis, np.asarray(evals), m)


@dataclass(frozen=True)
class MuEstimate:
    value: float
    converged: bool
    coeffs: np.ndarray = field(repr=False)
    per_start: tuple[float, ...] = ()


def _ascent(hier, p, n, y, max_iter, rtol):
    """Normalized-gradient ascent of |u|_p^p on the unit sphere of the H^1 norm.

    In y_j = c_j sqrt(1 + kappa_j) the objective is convex, so the fixed-point
    map y <- grad/|grad| increases it monotonically.
    """
    grid = hier.grid
    scale = 1.0 / np.sqrt(hier.h1_norms[n - 1:])
    phis = hier.basis[n - 1:]
    wts = grid.sphere_area * grid.weights
    y = y / np.linalg.norm(y)
    f_old = -math.inf
    for _ in range(max_iter):
        u = (y * scale) @ phis
        au = np.abs(u)
        f = float(np.dot(wts, au**p))
        grad = scale * (phis @ (wts * au ** (p - 2) * u))
        gn = np.linalg.norm(grad)
        if gn == 0:
            return f, y, True
        if f - f_old <= rtol * f:
            return f, y, True
        f_old = f
        y = grad / gn
    return f, y, False


def mu_n_estimate(grid: rc.RadialGrid, hierarchy: SubspaceHierarchy, p: float, n: int,
                  starts: int = 8, seed=None, max_iter: int = 5000,
                  rtol: float = 1e-14) -> MuEstimate:
    """inf of ||u||^2 / |u|_p^2 over span{phi_n..phi_m}, by multi-start ascent on |u|_p^p."""
    if not 2 <= p:
        raise ValueError("exponent must be at least 2")
    if not 1 <= n <= hierarchy.trunc:
        raise ValueError(f"level n={n} outside 1..{hierarchy.trunc}")
    if grid is not hierarchy.grid:
        raise ValueError("hierarchy was built on a different grid")
    rng = np.random.default_rng(seed)
    k = hierarchy.trunc - n + 1
    best, best_y, all_ok, vals = -math.inf, None, True, []
    for _ in range(starts):
        f, y, ok = _ascent(hierarchy, p, n, rng.standard_normal(k), max_iter, rtol)
        vals.append(f ** (-2 / p))
        all_ok &= ok
        if f > best:
            best, best_y = f, y
    if not all_ok:
        log.warning("mu_n ascent stagnated for p=%g, n=%d; returning the best start", p, n)
    coeffs = best_y / np.sqrt(hierarchy.h1_norms[n - 1:])
    return MuEstimate(best ** (-2 / p), all_ok, coeffs, tuple(vals))


def mu_n(grid: rc.RadialGrid, hierarchy: SubspaceHierarchy, p: float, n: int,
         starts: int = 8, seed=None) -> float:
    return mu_n_estimate(grid, hierarchy, p, n, starts, seed).value


def level_constant_M(mu_alpha: float, mu_beta: float, alpha: float, beta: float) -> float:
    return (mu_alpha ** (-alpha / 2) + mu_beta ** (-beta / 2)) ** (-2 / beta)


def barrier_radius(M_n: float, L: float, beta: float) -> float:
    return M_n ** (beta / (2 * (beta - 2))) / L ** (1 / (beta - 2))


def tilt_to_gradient(hierarchy: SubspaceHierarchy, coeffs, n: int, target: float,
                     tol: float = BARRIER_TOL):
    """Reweight c_j -> c_j exp(t kappa_j / kappa_max), L^2-normalized, so that |grad u|_2^2 = target.

    The gradient energy of the tilted field increases monotonically with t
    (its derivative is a variance), so a bracketing solve suffices.  Returns
    normalized coefficients, or None when the target is outside the
    reachable range or the tolerance is missed.
    """
    kap = hierarchy.grad_sq[n - 1:]
    c2 = np.asarray(coeffs, dtype=float) ** 2
    keep = c2 > 0
    if not keep.any():
        return None
    kmax = kap[-1]
    logc2 = np.log(np.where(keep, c2, 1.0))

    def grad_energy(t):
        lw = np.where(keep, logc2 + 2 * t * kap / kmax, -np.inf)
        return math.exp(logsumexp(lw, b=np.where(keep, kap, 0.0)) - logsumexp(lw))

    lo, hi = kap[keep].min(), kap[keep].max()
    if not lo < target < hi:
        return None
    a, b = -1.0, 1.0
    while grad_energy(a) > target:
        a *= 2
        if a < -1e6:
            return None
    while grad_energy(b) < target:
        b *= 2
        if b > 1e6:
            return None
    t = brentq(lambda x: grad_energy(x) - target, a, b, xtol=1e-15, rtol=1e-15)
    lw = logc2 + 2 * t * kap / kmax
    new = np.sign(coeffs) * np.where(keep, np.exp(0.5 * (lw - lw[keep].max())), 0.0)
    new /= np.linalg.norm(new)
    if abs(math.sqrt(float(np.dot(new**2, kap))) - math.sqrt(target)) > tol * math.sqrt(target):
        return None
    return new


@dataclass
class MinMaxReport:
    level: int
    mu_alpha: float
    mu_beta: float
    M_n: float
    K: float
    L: float
    rho_n: float
    lemma2_bound: float
    samples_checked: int
    violations: int
    definitional_violations: int = 0
    mu_converged: bool = True
    barrier_samples: int = 0
    barrier_failures: int = 0
    barrier_violations: int = 0
    barrier_min_energy: float = math.nan
    hierarchy: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _sample_coeffs(rng, kap):
    # random decay rates spread the samples over many gradient scales
    t = rng.uniform(0.0, 2.0)
    c = rng.standard_normal(kap.size) * (1 + kap) ** (-t / 2)
    return c / np.linalg.norm(c)


def minmax_report(grid: rc.RadialGrid, nl: PowerSumNonlinearity, hierarchy: SubspaceHierarchy,
                  n: int, samples: int = 1000, seed=None, starts: int = 8,
                  barrier_samples: int | None = None) -> MinMaxReport:
    """Constants of level n and a sampled check of the lower bound for J on the truncated complement.

    For unit-mass u in span{phi_n..phi_m} with A = |grad u|_2^2,

        J(u) >= A/2 - K mu_a^{-a/2} (A+1)^{a/2} - K mu_b^{-b/2} (A+1)^{b/2},

    with a = alpha, b = beta and mu the truncation-exact estimates.  Samples
    rescaled to |grad u|_2 = rho_n are checked against rho_n^2/6 minus 5%.
    """
    if n < 1:
        raise ValueError("level n must be >= 1")
    if grid is not hierarchy.grid:
        raise ValueError("hierarchy was built on a different grid")
    rng = np.random.default_rng(seed)
    mu_seed, sample_seed = rng.integers(0, 2**63 - 1, size=2)
    a, b = nl.alpha, nl.beta
    K = h2_constant_K(nl)
    L = lemma2_constant_L(nl, K)
    est_a = mu_n_estimate(grid, hierarchy, a, n, starts, mu_seed)
    est_b = est_a if b == a else mu_n_estimate(grid, hierarchy, b, n, starts, mu_seed)
    mu_a, mu_b = est_a.value, est_b.value
    M_n = level_constant_M(mu_a, mu_b, a, b)
    rho = barrier_radius(M_n, L, b)
    kap = hierarchy.grad_sq[n - 1:]

    srng = np.random.default_rng(sample_seed)
    chain_bad = defn_bad = 0
    for _ in range(samples):
        c = _sample_coeffs(srng, kap)
        u = hierarchy.field(c, n)
        A = float(np.dot(c * c, kap))
        B = moments(grid, nl, u)
        J = energy_from_moments(nl, A, B)
        bound = (A / 2 - K * mu_a ** (-a / 2) * (A + 1) ** (a / 2)
                 - K * mu_b ** (-b / 2) * (A + 1) ** (b / 2))
        if J < bound - CHAIN_SLACK:
            chain_bad += 1
        for p, mu in ((a, mu_a), (b, mu_b)):
            if rc.lp_norm_pow(grid, u, p) ** (2 / p) > (A + 1) / mu * (1 + 1e-12):
                defn_bad += 1

    n_barrier = samples if barrier_samples is None else barrier_samples
    fails = bad = 0
    jmin = math.inf
    for _ in range(n_barrier):
        c = tilt_to_gradient(hierarchy, _sample_coeffs(srng, kap), n, rho * rho)
        if c is None:
            fails += 1
            continue
        J = energy_from_moments(nl, float(np.dot(c * c, kap)),
                                moments(grid, nl, hierarchy.field(c, n)))
        jmin = min(jmin, J)
        if J < rho * rho / 6 - BARRIER_SLACK * rho * rho:
            bad += 1
    if fails:
        log.info("level %d: %d of %d barrier samples could not reach |grad u| = rho_n = %.6g",
                 n, fails, n_barrier, rho)
    return MinMaxReport(
        level=n, mu_alpha=mu_a, mu_beta=mu_b, M_n=M_n, K=K, L=L, rho_n=rho,
        lemma2_bound=rho * rho / 6, samples_checked=samples, violations=chain_bad,
        definitional_violations=defn_bad, mu_converged=est_a.converged and est_b.converged,
        barrier_samples=n_barrier, barrier_failures=fails, barrier_violations=bad,
        barrier_min_energy=jmin if math.isfinite(jmin) else math.nan,
        hierarchy={"kind": "discrete Dirichlet eigenvectors", "dimension": grid.dimension,
                   "radius": grid.radius, "count": grid.count, "modes": hierarchy.trunc})
