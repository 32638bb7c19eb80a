import math

import numpy as np
import pytest

from normsol import radial_core as rc
from normsol.minmax import (barrier_radius, build_hierarchy, level_constant_M, minmax_report,
                            mu_n, mu_n_estimate, tilt_to_gradient)
from normsol.nonlinearity import validate_powers

PAIR = validate_powers(3, [(1, 3.6), (1, 4.4)])


@pytest.fixture(scope="module")
def small():
    g = rc.make_grid(3, 2.0, 400)
    return g, build_hierarchy(g, 100)


def test_gram_matrix_is_identity(small):
    g, hier = small
    gram = np.array([[rc.inner(g, a, b) for b in hier.basis] for a in hier.basis])
    assert np.max(np.abs(gram - np.eye(hier.trunc))) < 1e-10


def test_spectrum_is_second_order():
    R = 2.0

    def errs(M):
        g = rc.make_grid(3, R, M)
        hier = build_hierarchy(g, 5)
        exact = (np.arange(1, 6) * math.pi / R) ** 2
        return np.abs(hier.grad_sq - exact) / exact

    e1, e2 = errs(200), errs(400)
    assert np.all(e1 < 1e-3)
    assert np.all((e1 / e2 > 3.5) & (e1 / e2 < 4.5))


def test_modes_match_spherical_bessel_profiles():
    g = rc.make_grid(3, 2.0, 800)
    hier = build_hierarchy(g, 3)
    r = g.nodes
    for j, phi in enumerate(hier.basis, start=1):
        exact = np.sinc(j * r / 2.0)  # sin(j pi r / R) / (j pi r / R)
        exact /= rc.l2_norm(g, exact)
        assert rc.l2_norm(g, phi - exact) < 1e-4


def test_gradient_energy_of_modes(small):
    g, hier = small
    for j in (0, 10, 50):
        assert rc.grad_l2_sq(g, hier.basis[j]) == pytest.approx(hier.grad_sq[j], rel=1e-10)
    assert np.all(np.diff(hier.grad_sq) > 0)
    assert np.array_equal(hier.h1_norms, hier.grad_sq + 1)


def test_single_mode_is_positive():
    g = rc.make_grid(3, 2.0, 100)
    hier = build_hierarchy(g, 1)
    assert np.all(hier.basis[0][:-1] > 0)


def test_resolution_guard():
    g = rc.make_grid(3, 2.0, 100)
    with pytest.raises(ValueError, match="M/4"):
        build_hierarchy(g, 26)
    with pytest.raises(ValueError):
        build_hierarchy(g, 0)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_quadratic_quotient_is_closed_form(small, n):
    # for p = 2 the quotient ||u||^2 / |u|_2^2 is minimized by phi_n: kappa_n + 1 >= 1
    g, hier = small
    mu = mu_n(g, hier, 2.0, n, starts=4, seed=0)
    assert mu >= 1
    assert mu == pytest.approx(hier.h1_norms[n - 1], rel=1e-10)


@pytest.mark.parametrize("p", [3.6, 4.4])
def test_mu_nondecreasing(small, p):
    g, hier = small
    mus = [mu_n(g, hier, p, n, seed=1) for n in range(1, 9)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(mus, mus[1:]))


def test_mu_multistart_stable(small):
    g, hier = small
    a = mu_n_estimate(g, hier, 4.4, 1, starts=8, seed=3)
    b = mu_n_estimate(g, hier, 4.4, 1, starts=16, seed=3)
    assert a.converged and b.converged
    assert abs(a.value - b.value) < 1e-6 * a.value


def test_mu_definitional_inequality(small):
    g, hier = small
    rng = np.random.default_rng(5)
    n, p = 3, 3.6
    mu = mu_n(g, hier, p, n, seed=2)
    kap = hier.grad_sq[n - 1:]
    for _ in range(200):
        c = rng.standard_normal(kap.size) / (1 + kap) ** 0.5
        c /= np.linalg.norm(c)
        u = hier.field(c, n)
        assert rc.lp_norm_pow(g, u, p) ** (2 / p) <= (np.dot(c * c, kap) + 1) / mu * (1 + 1e-12)


def test_level_constant_single_power():
    for mu, p in ((3.0, 4.0), (17.5, 3.6), (250.0, 5.5)):
        assert level_constant_M(mu, mu, p, p) == pytest.approx(mu * 2 ** (-2 / p), rel=1e-12)


def test_barrier_radius_algebra():
    M, L, b = 7.0, 0.9, 4.4
    rho = barrier_radius(M, L, b)
    assert rho ** (b - 2) * L == pytest.approx(M ** (b / 2), rel=1e-12)


def test_tilt_hits_target(small):
    g, hier = small
    rng = np.random.default_rng(9)
    n = 2
    kap = hier.grad_sq[n - 1:]
    c = rng.standard_normal(kap.size)
    c /= np.linalg.norm(c)
    target = 0.5 * (kap[0] + kap[-1])
    t = tilt_to_gradient(hier, c, n, target)
    assert t is not None
    assert np.linalg.norm(t) == pytest.approx(1.0, rel=1e-14)
    assert math.sqrt(np.dot(t * t, kap)) == pytest.approx(math.sqrt(target), rel=1e-8)
    assert tilt_to_gradient(hier, c, n, 0.5 * kap[0]) is None


def test_report_small_run(small):
    g, hier = small
    reports = [minmax_report(g, PAIR, hier, n, samples=100, seed=n) for n in (1, 2, 3)]
    for rep in reports:
        assert rep.violations == 0 and rep.definitional_violations == 0
        assert rep.lemma2_bound == pytest.approx(rep.rho_n**2 / 6, rel=1e-15)
        assert rep.M_n == pytest.approx(level_constant_M(rep.mu_alpha, rep.mu_beta, 3.6, 4.4),
                                        rel=1e-15)
    rho = [r.rho_n for r in reports]
    assert rho[0] < rho[1] < rho[2]


def test_report_is_deterministic(small):
    g, hier = small
    a = minmax_report(g, PAIR, hier, 2, samples=50, seed=4).as_dict()
    b = minmax_report(g, PAIR, hier, 2, samples=50, seed=4).as_dict()
    assert a == b


def test_report_rejects_bad_level(small):
    g, hier = small
    with pytest.raises(ValueError):
        minmax_report(g, PAIR, hier, 0)
