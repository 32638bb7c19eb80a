"""Radial grids, quadrature over R^N and finite-volume operators for radial fields.

A radial function u(|x|) on R^N is sampled on the uniform nodes r_j = j h,
j = 0..M, h = R/M, with the Dirichlet truncation u(R) = 0.  Node j owns the
dual cell [r_{j-1/2}, r_{j+1/2}] (clipped to [0, R]); its quadrature weight is
the exact radial volume of that cell,

    w_j = (r_{j+1/2}^N - r_{j-1/2}^N) / N,

so that  integral_{R^N} f(|x|) dx  ~=  omega_N * sum_j w_j f(r_j).

The kinetic energy is assembled from cell differences,

    |grad u|_2^2 ~= omega_N * sum_j r_{j+1/2}^{N-1} (u_{j+1} - u_j)^2 / h,

and the Laplacian is minus one half of its gradient in the weighted inner
product.  That makes the discrete Laplacian exactly self-adjoint, exact on
quadratics, and consistent with the energy to rounding error.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

log = logging.getLogger(__name__)

MIN_NODES = 16
DEFAULT_S_MAX = 1.0


def gamma_half_integer(x: float) -> float:
    """Gamma function at a positive integer or half-integer."""
    twice = round(2 * x)
    if twice <= 0 or abs(2 * x - twice) > 1e-12:
        raise ValueError(f"gamma_half_integer needs a positive (half-)integer, got {x}")
    if twice % 2 == 0:
        return float(math.factorial(twice // 2 - 1))
    k = (twice - 1) // 2
    return math.factorial(2 * k) * math.sqrt(math.pi) / (4**k * math.factorial(k))


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N, 2 pi^{N/2} / Gamma(N/2)."""
    return 2.0 * math.pi ** (N / 2) / gamma_half_integer(N / 2)


def critical_exponent(N: int) -> float:
    """Critical Sobolev exponent 2N/(N-2), infinite for N = 2."""
    return math.inf if N == 2 else 2.0 * N / (N - 2)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    dimension: int
    radius: float
    count: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    sphere_area: float

    @property
    def h(self) -> float:
        return self.radius / self.count

    @property
    def size(self) -> int:
        return self.count + 1

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.count) + 0.5) * self.h

    @property
    def flux_weights(self) -> np.ndarray:
        """r_{j+1/2}^{N-1} / h for each of the M cells."""
        return self.midpoints ** (self.dimension - 1) / self.h


def make_grid(N: int, R: float, M: int) -> RadialGrid:
    if int(N) != N or N < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {N}")
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    if int(M) != M or M < MIN_NODES:
        raise ValueError(f"need at least {MIN_NODES} cells, got {M}")
    N, M, R = int(N), int(M), float(R)
    h = R / M
    nodes = np.arange(M + 1) * h
    nodes[-1] = R
    edges = np.concatenate(([0.0], (np.arange(M) + 0.5) * h, [R]))
    weights = np.diff(edges**N) / N
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return RadialGrid(N, R, M, nodes, weights, sphere_area(N))


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples of a radial profile on a grid; the last sample is the boundary value."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(f"field has {values.shape} samples, grid has {self.grid.size} nodes")
        if values[-1] != 0.0:
            raise ValueError("radial field must vanish at the truncation radius")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __neg__(self) -> RadialField:
        return RadialField(self.grid, -self.values)


def _samples(grid: RadialGrid, samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float)
    if arr.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} samples, got shape {arr.shape}")
    return arr


def integrate(grid: RadialGrid, samples) -> float:
    """Integral over R^N of the radial function with the given nodal samples."""
    return grid.sphere_area * float(np.dot(grid.weights, _samples(grid, samples)))


def inner(grid: RadialGrid, u, v) -> float:
    """L^2(R^N) inner product of two radial fields."""
    return grid.sphere_area * float(np.dot(grid.weights, _samples(grid, u) * _samples(grid, v)))


def l2_norm(grid: RadialGrid, u) -> float:
    return math.sqrt(inner(grid, u, u))


def lp_norm_pow(grid: RadialGrid, u, p: float) -> float:
    """|u|_p^p."""
    if p < 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {p}")
    return integrate(grid, np.abs(_samples(grid, u)) ** p)


def grad_l2_sq(grid: RadialGrid, u) -> float:
    """|grad u|_2^2 from cell differences."""
    du = np.diff(_samples(grid, u))
    return grid.sphere_area * float(np.dot(grid.flux_weights, du * du))


def laplacian(grid: RadialGrid, u) -> np.ndarray:
    """Radial Laplacian u'' + (N-1)/r u' in flux form.

    At r = 0 this reduces to 2N (u_1 - u_0)/h^2, i.e. N u''(0) with a
    symmetric ghost node.  The boundary entry is set to zero.
    """
    u = _samples(grid, u)
    flux = grid.flux_weights * np.diff(u)
    out = np.zeros_like(u)
    out[:-1] += flux
    out[1:-1] -= flux[:-1]
    out[:-1] /= grid.weights[:-1]
    return out


def stiffness_bands(grid: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the symmetric matrix K with W(-Lap) = K on interior nodes.

    K acts on the M unknowns u_0..u_{M-1} (u_M = 0 is eliminated).
    """
    c = grid.flux_weights
    diag = c.copy()
    diag[1:] += c[:-1]
    return diag, -c[:-1]


def dilate(grid: RadialGrid, u, s: float, s_max: float = DEFAULT_S_MAX) -> np.ndarray:
    """Samples of e^{sN/2} u(e^s r), monotone-cubic interpolated, zero beyond R."""
    if abs(s) > s_max:
        raise ValueError(f"|s| = {abs(s)} exceeds s_max = {s_max}")
    u = _samples(grid, u)
    if s == 0:
        return u.copy()
    x = math.exp(s) * grid.nodes
    out = np.zeros_like(u)
    inside = x < grid.radius
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        # slopes of exactly-zero tails overflow inside the harmonic mean; the limit is 0
        out[inside] = PchipInterpolator(grid.nodes, u)(x[inside])
    out[-1] = 0.0
    return math.exp(s * grid.dimension / 2) * out


def leakage(grid: RadialGrid, u, fraction: float = 0.1) -> float:
    """Largest |u| on the outer `fraction` of the grid."""
    u = _samples(grid, u)
    start = int(math.floor((1 - fraction) * grid.count))
    return float(np.max(np.abs(u[start:])))


def check_leakage(grid: RadialGrid, u, tol: float = 1e-8) -> bool:
    """Warn when the profile has not decayed on the last 10% of the ball."""
    value = leakage(grid, u)
    if value > tol:
        log.warning("profile reaches |u| = %.3g on the outer 10%% of [0, %g]; "
                    "truncation radius may be too small", value, grid.radius)
        return False
    return True
