"""Compiled Dormand-Prince 5(4) integrator for the radial shooting ODE.

State y = (u, u', int_0^r u^2 s^{N-1} ds).  The integration stops when the
mechanical energy u'^2/2 + G(u) + lambda u^2/2 turns negative (trapped) or
after `max_crossings` sign changes of u (max_crossings < 0 means never).
Accepted steps are stored with their derivatives for cubic Hermite dense
output.
"""
from __future__ import annotations

import numpy as np
from numba import njit

TRAPPED, CROSSINGS, END = 1, 2, 0

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@njit(cache=True)
def _g(u, coef, expo):
    au = abs(u)
    s = 0.0
    for i in range(coef.size):
        s += coef[i] * au ** (expo[i] - 2)
    return s * u


@njit(cache=True)
def _G(u, coef, expo):
    au = abs(u)
    s = 0.0
    for i in range(coef.size):
        s += coef[i] * au ** expo[i] / expo[i]
    return s


@njit(cache=True)
def _f(r, y, N, lam, coef, expo, out):
    out[0] = y[1]
    out[1] = -(N - 1) / r * y[1] - lam * y[0] - _g(y[0], coef, expo)
    out[2] = y[0] * y[0] * r ** (N - 1)


@njit(cache=True)
def _energy(y, lam, coef, expo):
    return 0.5 * y[1] * y[1] + _G(y[0], coef, expo) + 0.5 * lam * y[0] * y[0]


@njit(cache=True)
def _hermite_u(r, r0, r1, y0, y1, f0, f1, comp):
    h = r1 - r0
    t = (r - r0) / h
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    return h00 * y0[comp] + h10 * h * f0[comp] + h01 * y1[comp] + h11 * h * f1[comp]


@njit(cache=True)
def integrate(N, lam, coef, expo, r0, y0, r_max, max_crossings, rtol, atol, store):
    """Returns (status, crossing radii, stored r, stored y, stored f)."""
    cap = 1024 if store else 2
    rs = np.empty(cap)
    ys = np.empty((cap, 3))
    fs = np.empty((cap, 3))
    cross = np.empty(64)
    n_cross = 0
    k = np.empty((7, 3))
    y = y0.copy()
    ytmp = np.empty(3)
    r = r0
    _f(r, y, N, lam, coef, expo, k[0])
    n_st = 0
    if store:
        rs[0] = r
        ys[0] = y
        fs[0] = k[0]
        n_st = 1
    h = 1e-3 * (r_max - r0)
    h = min(h, 0.1 * r0 * 1e3)
    status = END
    while r < r_max:
        if r + h > r_max:
            h = r_max - r
        for s in range(1, 7):
            for j in range(3):
                acc = 0.0
                for m in range(s):
                    acc += _A[s, m] * k[m, j]
                ytmp[j] = y[j] + h * acc
            _f(r + _C[s] * h, ytmp, N, lam, coef, expo, k[s])
        # ytmp now holds the 5th-order solution (FSAL row)
        err = 0.0
        for j in range(3):
            e = 0.0
            for m in range(7):
                e += _E[m] * k[m, j]
            sc = atol[j] + rtol * max(abs(y[j]), abs(ytmp[j]))
            err += (h * e / sc) ** 2
        err = np.sqrt(err / 3)
        if err <= 1.0:
            r_new = r + h
            y_old = y.copy()
            f_old = k[0].copy()
            y = ytmp.copy()
            k[0] = k[6]
            if store:
                if n_st == rs.size:
                    rs = np.concatenate((rs, np.empty(rs.size)))
                    ys = np.concatenate((ys, np.empty_like(ys)))
                    fs = np.concatenate((fs, np.empty_like(fs)))
                rs[n_st] = r_new
                ys[n_st] = y
                fs[n_st] = k[0]
                n_st += 1
            if (y_old[0] > 0) != (y[0] > 0) and y_old[0] != 0:
                # locate the sign change on the Hermite interpolant
                a, b = r, r_new
                for _ in range(60):
                    c = 0.5 * (a + b)
                    uc = _hermite_u(c, r, r_new, y_old, y, f_old, k[0], 0)
                    if (uc > 0) == (y_old[0] > 0):
                        a = c
                    else:
                        b = c
                if n_cross == cross.size:
                    cross = np.concatenate((cross, np.empty(cross.size)))
                cross[n_cross] = 0.5 * (a + b)
                n_cross += 1
                if max_crossings >= 0 and n_cross >= max_crossings:
                    status = CROSSINGS
                    r = r_new
                    break
            r = r_new
            if _energy(y, lam, coef, expo) < 0:
                status = TRAPPED
                break
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
        if h < 1e-14 * max(r, r0):
            status = -1
            break
    return status, cross[:n_cross].copy(), rs[:n_st].copy(), ys[:n_st].copy(), fs[:n_st].copy()


@njit(cache=True)
def hermite_eval(r_eval, rs, ys, fs, comp):
    out = np.empty(r_eval.size)
    n = rs.size
    for i in range(r_eval.size):
        r = r_eval[i]
        j = np.searchsorted(rs, r) - 1
        if j < 0:
            j = 0
        if j > n - 2:
            j = n - 2
        out[i] = _hermite_u(r, rs[j], rs[j + 1], ys[j], ys[j + 1], fs[j], fs[j + 1], comp)
    return out
