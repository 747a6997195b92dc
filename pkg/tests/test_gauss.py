import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

from isostab.bodies import SymmetricBody, cut_corner_cube, make_standard, polar
from isostab.errors import ContainmentViolated, DomainError
from isostab.gauss import (ExactConstants, cap_fraction, cap_measure_check, cube_gaussian_measure,
                           duality_check, ell_cube_exact, ell_difference_check, ell_layer, ell_mc,
                           ell_paired, gaussian_measure, gaussian_measure_paired, is_rotated_cube,
                           mean_width_mc, norm_ppf, width_cross_exact, width_cube_exact, width_paired)

SAMPLES = 200_000


def _within(est, exact, k=4.0):
    return abs(est.value - exact) <= k * est.std_error


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_ell_cube_against_mpmath(n):
    f = lambda t: 1 - mpmath.erf(t / mpmath.sqrt(2)) ** n
    oracle = float(mpmath.quad(f, [0, 2, 6, mpmath.inf]))
    assert math.isclose(ell_cube_exact(n), oracle, rel_tol=1e-11)


@pytest.mark.parametrize("n", [2, 3, 4, 7])
def test_width_cube_against_marginal_density(n):
    # E|U_1| from the marginal density of a sphere coordinate, ∝ (1 - s^2)^((n-3)/2)
    w = lambda s: (1 - s * s) ** ((n - 3) / 2)
    num, _ = integrate.quad(lambda s: s * w(s), 0, 1)
    den, _ = integrate.quad(w, 0, 1)
    assert math.isclose(width_cube_exact(n), 2 * n * num / den, rel_tol=1e-8)


@pytest.mark.parametrize("n", [2, 3, 6])
def test_exact_constants(n):
    c = ExactConstants.for_dim(n)
    assert math.isclose(c.ell_ball, stats.chi(n).mean(), rel_tol=1e-12)
    assert math.isclose(c.ell_cross, math.sqrt(2 / math.pi) * n, rel_tol=1e-15)
    assert c.W_ball == 2.0


def test_norm_ppf_matches_scipy():
    p = np.array([1e-300, 1e-12, 0.01, 0.5, 0.7, 1 - 1e-9])
    assert np.allclose(norm_ppf(p), stats.norm.ppf(p), rtol=1e-12)


@pytest.mark.parametrize("n", [2, 4])
def test_ell_mc_cross_and_cube(n):
    assert _within(ell_mc(make_standard("cross", n), SAMPLES), ExactConstants.for_dim(n).ell_cross)
    assert _within(ell_mc(make_standard("cube", n), SAMPLES), ell_cube_exact(n))


@pytest.mark.parametrize("n", [2, 3])
def test_width_mc_cube_and_cross(n):
    assert _within(mean_width_mc(make_standard("cube", n), SAMPLES), width_cube_exact(n))
    assert _within(mean_width_mc(make_standard("cross", n), SAMPLES), width_cross_exact(n))


def test_width_of_ball_polytope_approaches_two():
    est = mean_width_mc(make_standard("ball_poly", 2, facets=512), 50_000)
    assert abs(est.value - 2.0) < 1e-3


def test_ell_layer_matches_direct():
    b = cut_corner_cube(3, 0.2)
    a = ell_mc(b, SAMPLES, stream="layer/oracle")
    c = ell_layer(b, samples_per_t=SAMPLES, stream="layer/oracle")
    assert abs(a.value - c.value) < 1e-3 * a.value


def test_ell_layer_refuses_short_range():
    with pytest.raises(DomainError):
        ell_layer(make_standard("cross", 3), t_max=1.0, samples_per_t=5000)


def test_small_sample_counts_rejected():
    with pytest.raises(DomainError):
        ell_mc(make_standard("cube", 2), 10)
    with pytest.raises(DomainError):
        mean_width_mc(make_standard("cube", 2), 10)


@pytest.mark.parametrize("body", ["cross", "cube", "cut"])
def test_duality_relation(body):
    b = cut_corner_cube(3, 0.2) if body == "cut" else make_standard(body, 3)
    assert duality_check(b, SAMPLES).ok


def test_paired_differences_consistent():
    bodies = [make_standard("cube", 3), cut_corner_cube(3, 0.2)]
    est, diff = ell_paired(bodies, SAMPLES)
    assert math.isclose(diff[1].value, est[1].value - est[0].value, rel_tol=1e-9, abs_tol=1e-12)
    assert diff[1].std_error < 0.2 * est[1].std_error
    assert diff[0].value == 0.0
    west, wdiff = width_paired(bodies, SAMPLES)
    assert wdiff[1].value < 0  # the cut body lies inside the cube


def test_cube_gaussian_measure_closed_form():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    cube = make_standard("cube", 3).rotated(q)
    assert is_rotated_cube(cube)
    exact = gaussian_measure(cube, 1.3)
    assert exact.stream == "exact"
    assert math.isclose(exact.value, (stats.norm.cdf(1.3) - stats.norm.cdf(-1.3)) ** 3, rel_tol=1e-13)
    # the same cube written in vertex form goes through Monte Carlo
    vcube = SymmetricBody("V", np.array([[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]], float))
    assert not is_rotated_cube(vcube)
    assert _within(gaussian_measure(vcube, 1.3, SAMPLES), cube_gaussian_measure(3, 1.3))


def test_gaussian_measure_paired_against_cube():
    bodies = [make_standard("cube", 2), cut_corner_cube(2, 0.2)]
    est, diff = gaussian_measure_paired(bodies, 1.0, SAMPLES)
    assert _within(est[0], cube_gaussian_measure(2, 1.0))
    assert diff[1].value < -3 * diff[1].std_error
    with pytest.raises(DomainError):
        gaussian_measure(bodies[0], 0.0)


@pytest.mark.parametrize("n,alpha", [(2, 0.3), (3, 0.7), (5, 1.2), (4, math.pi / 2)])
def test_cap_fraction_against_sampling(n, alpha):
    rng = np.random.default_rng(n)
    u = rng.standard_normal((400_000, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    frac = np.mean(u[:, 0] >= math.cos(alpha))
    assert abs(cap_fraction(n, alpha) - frac) < 4 * math.sqrt(frac * (1 - frac) / 400_000) + 1e-12
    exact, bound, ok = cap_measure_check(n, alpha)
    assert ok and exact >= bound


def test_ell_difference_bound():
    inner, outer = cut_corner_cube(2, 0.3), make_standard("cube", 2)
    res = ell_difference_check(inner, outer, math.sqrt(2), 100_000)
    assert res.ok and res.lhs.value > res.rhs > 0
    with pytest.raises(ContainmentViolated):
        ell_difference_check(outer, inner, math.sqrt(2))
    with pytest.raises(ContainmentViolated):
        ell_difference_check(inner, outer, 1.0)


def test_polar_of_cube_is_cross():
    assert polar(make_standard("cube", 3)).form == "V"
