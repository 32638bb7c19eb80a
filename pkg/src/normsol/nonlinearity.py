"""Sum-of-powers nonlinearities g(u) = sum_i a_i |u|^{p_i - 2} u and their hypothesis constants."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .radial_core import critical_exponent


class InadmissibleNonlinearity(ValueError):
    pass


@dataclass(frozen=True)
class PowerSumNonlinearity:
    dimension: int
    terms: tuple[tuple[float, float], ...]

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([a for a, _ in self.terms])

    @property
    def exponents(self) -> np.ndarray:
        return np.array([p for _, p in self.terms])

    @property
    def alpha(self) -> float:
        return self.terms[0][1]

    @property
    def beta(self) -> float:
        return self.terms[-1][1]

    @property
    def dilation_rates(self) -> np.ndarray:
        """theta_i = N (p_i - 2) / 2, the growth rate of |s*u|_{p_i}^{p_i} in s."""
        return self.dimension * (self.exponents - 2) / 2

    def g(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        return sum(a * ax ** (p - 2) for a, p in self.terms) * x

    def G(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        return sum(a * ax**p / p for a, p in self.terms)

    def dg(self, x):
        """g'(x) = sum_i a_i (p_i - 1) |x|^{p_i - 2}."""
        ax = np.abs(np.asarray(x, dtype=float))
        return sum(a * (p - 1) * ax ** (p - 2) for a, p in self.terms)


def admissible_interval(N: int) -> tuple[float, float]:
    """Open interval (2 + 4/N, 2*) of mass-supercritical, Sobolev-subcritical exponents."""
    return (2.0 * N + 4.0) / N, critical_exponent(N)  # one rounding, so 10/3 is excluded


def power_violations(N: int, terms) -> list[str]:
    """Every reason `terms` is not an admissible power sum in dimension N (empty if valid)."""
    problems = []
    if len(terms) == 0:
        return ["nonlinearity needs at least one term"]
    lo, hi = admissible_interval(N)
    seen = set()
    for a, p in terms:
        if not a > 0:
            problems.append(f"coefficient {a} of |u|^{p} must be positive")
        if not lo < p < hi:
            problems.append(f"exponent {p} outside the admissible open interval "
                            f"({lo:.6g}, {hi:.6g}) for N={N}")
        if p in seen:
            problems.append(f"duplicate exponent {p}")
        seen.add(p)
    return problems


def validate_powers(N: int, terms) -> PowerSumNonlinearity:
    if int(N) != N or N < 2:
        raise InadmissibleNonlinearity(f"dimension must be an integer >= 2, got {N}")
    terms = [(float(a), float(p)) for a, p in terms]
    problems = power_violations(int(N), terms)
    if problems:
        raise InadmissibleNonlinearity("; ".join(problems))
    return PowerSumNonlinearity(int(N), tuple(sorted(terms, key=lambda t: t[1])))


def g_eval(nl: PowerSumNonlinearity, x: float) -> float:
    return float(nl.g(x))


def G_eval(nl: PowerSumNonlinearity, x: float) -> float:
    return float(nl.G(x))


def _log_ratio(nl: PowerSumNonlinearity, t: float) -> float:
    # log of G(x) / (x^alpha + x^beta) at x = e^t, evaluated without overflow
    a, b = nl.alpha, nl.beta
    num = np.logaddexp.reduce([math.log(c / p) + p * t for c, p in nl.terms])
    den = np.logaddexp(a * t, b * t)
    return float(num - den)


def _ratio_limits(nl: PowerSumNonlinearity) -> tuple[float, float]:
    """Limits of G(x) / (x^alpha + x^beta) as x -> 0 and x -> infinity."""
    (a1, p1), (ak, pk) = nl.terms[0], nl.terms[-1]
    if len(nl.terms) == 1:
        return a1 / (2 * p1), a1 / (2 * p1)
    return a1 / p1, ak / pk


def h2_constant_K(nl: PowerSumNonlinearity) -> float:
    """K = sup_{x>0} G(x) / (x^alpha + x^beta).

    The supremum may sit at an end (for a_i = 1 it is 1/alpha, approached as
    x -> 0), so both limits are included next to a log-spaced scan over
    x in [1e-12, 1e12] and a bounded refinement around the best scan point.
    """
    t = np.linspace(-12 * math.log(10), 12 * math.log(10), 4801)
    vals = np.array([_log_ratio(nl, ti) for ti in t])
    i = int(np.argmax(vals))
    best = vals[i]
    if 0 < i < len(t) - 1:
        res = minimize_scalar(lambda x: -_log_ratio(nl, x), bounds=(t[i - 1], t[i + 1]),
                              method="bounded", options={"xatol": 1e-12})
        best = max(best, -res.fun)
    return max(math.exp(best), *_ratio_limits(nl))


def lemma2_constant_L(nl: PowerSumNonlinearity, K: float | None = None) -> float:
    """L = 3K max_{x>0} (1+x^2)^{beta/2} / (1+x^beta) = 3K 2^{(beta-2)/2}.

    The objective is invariant under x -> 1/x, equals 1 in both limits, and
    peaks at x = 1.
    """
    if K is None:
        K = h2_constant_K(nl)
    return 3.0 * K * 2.0 ** ((nl.beta - 2) / 2)
