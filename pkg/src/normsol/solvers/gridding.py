"""Per-solution grid sizing.

A profile with central amplitude a and multiplier lambda < 0 oscillates near
the origin with local wavenumber k = sqrt(g'(a) - lambda) and decays like
exp(-sqrt(-lambda) r) past its last zero.  The grid step is h = eta / k.

Two error sources pull eta in opposite directions.  The discretization error
in the Pohozaev functional scales like eta^2, while the rounding floor of the
discrete residual (float64 samples fed through a second difference) scales
like eps k^2 / (eta^2 |lambda|).  `choose_eta` takes the Pohozaev target
unless that would push the rounding floor above half the residual tolerance.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from .. import radial_core as rc

ETA_TARGET = 0.008
DECAY_LENGTHS = 40.0
ROUNDOFF_FACTOR = 0.6      # measured constant in the rounding floor of the relative residual
MAX_COUNT = 4_000_000


def local_wavenumber(nl, lam: float, amplitude: float) -> float:
    return math.sqrt(float(nl.dg(abs(amplitude))) - lam)


def roundoff_floor(nl, lam: float, amplitude: float, eta: float) -> float:
    """Predicted rounding floor of residual / (1 + |lambda|) at step h = eta / k."""
    k = local_wavenumber(nl, lam, amplitude)
    return ROUNDOFF_FACTOR * np.finfo(float).eps * k * k / (eta * eta * (1 + abs(lam)))


def choose_eta(nl, lam: float, amplitude: float, tol_residual: float = 1e-8,
               target: float = ETA_TARGET) -> float:
    floor_at_one = roundoff_floor(nl, lam, amplitude, 1.0)
    return max(target, math.sqrt(floor_at_one / (0.5 * tol_residual)))


def auto_grid(N: int, nl, lam: float, amplitude: float, last_zero: float = 0.0,
              eta: float | None = None, tol_residual: float = 1e-8,
              max_count: int = MAX_COUNT) -> rc.RadialGrid:
    """Uniform grid resolving the core of a profile and its exponential tail."""
    if not lam < 0:
        raise ValueError("grid sizing needs lambda < 0")
    if eta is None:
        eta = choose_eta(nl, lam, amplitude, tol_residual)
    k = local_wavenumber(nl, lam, amplitude)
    R = last_zero + DECAY_LENGTHS / math.sqrt(-lam)
    M = max(rc.MIN_NODES, int(math.ceil(R * k / eta)))
    if M > max_count:
        raise ValueError(f"auto grid needs {M} cells, above the cap of {max_count}")
    return rc.make_grid(N, R, M)


def resample(grid: rc.RadialGrid, u, target: rc.RadialGrid) -> np.ndarray:
    """Monotone-cubic transfer of a profile between grids, zero outside the source ball."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(target.size)
    inside = target.nodes < grid.radius
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out[inside] = PchipInterpolator(grid.nodes, u)(target.nodes[inside])
    out[-1] = 0.0
    return out
