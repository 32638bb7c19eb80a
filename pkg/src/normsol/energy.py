"""Energy J(u) = |grad u|^2/2 - int G(u), its gradients, and the dilation fiber.

For u on the L^2 unit sphere and the mass-preserving dilation
(s*u)(x) = e^{sN/2} u(e^s x) the kinetic term scales as e^{2s} and the
moment |u|_p^p as e^{theta s} with theta = N(p-2)/2.  Everything along the
fiber is therefore a closed-form function of A = |grad u|_2^2 and the
moments B_i = |u|_{p_i}^{p_i}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import radial_core as rc
from .nonlinearity import PowerSumNonlinearity


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    moments: np.ndarray
    energy: float
    multiplier: float
    pohozaev: float


def moments(grid: rc.RadialGrid, nl: PowerSumNonlinearity, u) -> np.ndarray:
    return np.array([rc.lp_norm_pow(grid, u, p) for p in nl.exponents])


def energy_from_moments(nl: PowerSumNonlinearity, A: float, B) -> float:
    return A / 2 - float(np.sum(nl.coefficients * np.asarray(B) / nl.exponents))


def pohozaev_from_moments(nl: PowerSumNonlinearity, A: float, B) -> float:
    """P = A + N int G(u) - (N/2) int g(u) u, written per term."""
    a, p, B = nl.coefficients, nl.exponents, np.asarray(B)
    N = nl.dimension
    return A + N * float(np.sum(a * B / p)) - N / 2 * float(np.sum(a * B))


def energy_J(grid: rc.RadialGrid, nl: PowerSumNonlinearity, u) -> EnergyBreakdown:
    A = rc.grad_l2_sq(grid, u)
    B = moments(grid, nl, u)
    return EnergyBreakdown(
        kinetic=A,
        moments=B,
        energy=energy_from_moments(nl, A, B),
        multiplier=A - float(np.sum(nl.coefficients * B)),
        pohozaev=pohozaev_from_moments(nl, A, B),
    )


def J_value(grid: rc.RadialGrid, nl: PowerSumNonlinearity, u) -> float:
    return rc.grad_l2_sq(grid, u) / 2 - rc.integrate(grid, nl.G(u))


def gradient_J(grid: rc.RadialGrid, nl: PowerSumNonlinearity, u) -> np.ndarray:
    """L^2 gradient -Lap u - g(u) of J; zero at the boundary node."""
    u = np.asarray(u, dtype=float)
    out = -rc.laplacian(grid, u) - nl.g(u)
    out[-1] = 0.0
    return out


def constrained_grad(grid: rc.RadialGrid, nl: PowerSumNonlinearity, u,
                     mass_tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """Tangential gradient grad J(u) - lambda_u u on the unit L^2 sphere."""
    mass = rc.inner(grid, u, u)
    if abs(mass - 1) >= mass_tol:
        raise ValueError(f"field is not normalized: |u|_2^2 = {mass!r}")
    grad = gradient_J(grid, nl, u)
    lam = rc.inner(grid, grad, u)
    return grad - lam * np.asarray(u), lam


def pohozaev(grid: rc.RadialGrid, nl: PowerSumNonlinearity, u) -> float:
    return pohozaev_from_moments(nl, rc.grad_l2_sq(grid, u), moments(grid, nl, u))


def stretched_J(A: float, B, nl: PowerSumNonlinearity, s: float) -> float:
    """J(s*u) = e^{2s} A/2 - sum_i a_i e^{theta_i s} B_i / p_i."""
    if A < 0 or np.any(np.asarray(B) < 0):
        raise ValueError("kinetic term and moments must be non-negative")
    a, p, th = nl.coefficients, nl.exponents, nl.dilation_rates
    return math.exp(2 * s) * A / 2 - float(np.sum(a * np.exp(th * s) * np.asarray(B) / p))


def stretched_dJ(A: float, B, nl: PowerSumNonlinearity, s: float) -> float:
    """d/ds J(s*u); equals P(u) at s = 0."""
    a, p, th = nl.coefficients, nl.exponents, nl.dilation_rates
    return math.exp(2 * s) * A - float(np.sum(a * th * np.exp(th * s) * np.asarray(B) / p))


def stretched_d2J(A: float, B, nl: PowerSumNonlinearity, s: float) -> float:
    a, p, th = nl.coefficients, nl.exponents, nl.dilation_rates
    return 2 * math.exp(2 * s) * A - float(np.sum(a * th**2 * np.exp(th * s) * np.asarray(B) / p))


def fiber_max(A: float, B, nl: PowerSumNonlinearity, tol: float = 1e-12) -> float:
    """Unique maximizer s* of s -> J(s*u).

    Dividing the derivative by e^{2s} gives A - sum_i c_i e^{(theta_i - 2)s},
    strictly decreasing because every theta_i > 2; the root is bracketed by
    doubling, bisected, then polished with Newton steps.
    """
    B = np.asarray(B, dtype=float)
    if not A > 0 or not np.any(B > 0):
        raise ValueError("fiber maximum needs A > 0 and a positive moment")
    a, p, th = nl.coefficients, nl.exponents, nl.dilation_rates
    c = a * th * B / p

    def f(s):
        return A - float(np.sum(c * np.exp((th - 2) * s)))

    lo, hi = -1.0, 1.0
    while f(lo) <= 0:
        lo *= 2
    while f(hi) >= 0:
        hi *= 2
    s = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    for _ in range(5):
        d = f(s)
        if abs(d) * math.exp(2 * s) < tol * A:
            break
        s += d / float(np.sum(c * (th - 2) * np.exp((th - 2) * s)))
    return s
