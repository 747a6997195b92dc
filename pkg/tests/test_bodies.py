import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import ConvexHull

from isostab.bodies import (SymmetricBody, cut_corner_cube, gauge, hull_gauge, make_standard, polar,
                            support, z_bodies)
from isostab.errors import DomainError, ValidationError
from isostab.isotropy import random_isotropic

pts = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3)


def _body(seed, n=3, k=6, form="V"):
    rng = np.random.default_rng(seed)
    return SymmetricBody(form, rng.standard_normal((k, n)))


@given(seed=st.integers(0, 10_000), x=pts)
def test_batch_gauge_matches_lp(seed, x):
    for form in ("V", "H"):
        b = _body(seed, form=form)
        assert math.isclose(b.gauge_many(np.array([x]))[0], gauge(b, x), rel_tol=1e-8, abs_tol=1e-9)


@given(seed=st.integers(0, 10_000), x=pts)
def test_batch_support_matches_lp(seed, x):
    for form in ("V", "H"):
        b = _body(seed, form=form)
        assert math.isclose(b.support_many(np.array([x]))[0], support(b, x), rel_tol=1e-8, abs_tol=1e-9)


@given(seed=st.integers(0, 10_000), x=pts, y=pts)
def test_gauge_is_a_norm(seed, x, y):
    b = _body(seed)
    x, y = np.array(x), np.array(y)
    gx, gy, gs = b.gauge_many(np.array([x, y, x + y]))
    assert gs <= gx + gy + 1e-9
    assert math.isclose(b.gauge_many(-x)[0], gx, abs_tol=1e-12)
    assert math.isclose(b.gauge_many(2.5 * x)[0], 2.5 * gx, rel_tol=1e-12, abs_tol=1e-12)


@given(seed=st.integers(0, 10_000), x=pts, u=pts)
def test_polar_duality_inequality(seed, x, u):
    # <x, u> <= ||x||_K h_K(u) and h_K = gauge of the polar
    b = _body(seed)
    x, u = np.array(x), np.array(u)
    assert float(x @ u) <= b.gauge_many(x)[0] * b.support_many(u)[0] + 1e-9
    assert math.isclose(polar(b).gauge_many(u)[0], b.support_many(u)[0], rel_tol=1e-9, abs_tol=1e-12)


def test_standard_bodies_closed_form():
    x = np.array([[0.3, -2.0, 1.0]])
    assert math.isclose(make_standard("cross", 3).gauge_many(x)[0], 3.3)
    assert math.isclose(make_standard("cube", 3).gauge_many(x)[0], 2.0)
    assert math.isclose(make_standard("cross", 3).support_many(x)[0], 2.0)
    assert math.isclose(make_standard("cube", 3).support_many(x)[0], 3.3)


def test_standard_radii():
    for n in (2, 3, 4):
        cross, cube = make_standard("cross", n), make_standard("cube", n)
        assert math.isclose(cross.inradius, 1 / math.sqrt(n))
        assert math.isclose(cross.circumradius, 1.0)
        assert math.isclose(cube.inradius, 1.0)
        assert math.isclose(cube.circumradius, math.sqrt(n))


def test_ball_polytope_near_ball():
    b = make_standard("ball_poly", 2, facets=128)
    assert b.circumradius <= 1 + 1e-12
    assert b.inradius >= math.cos(math.pi / 64) - 1e-12


def test_cut_corner_vertices_match_enumeration():
    # brute-force vertex enumeration over n-subsets of the facet hyperplanes
    for n, eps in ((2, 0.1), (3, 0.25)):
        b = cut_corner_cube(n, eps)
        f = b.facet_normals
        found = []
        for idx in itertools.combinations(range(f.shape[0]), n):
            a = f[list(idx)]
            if abs(np.linalg.det(a)) < 1e-12:
                continue
            v = np.linalg.solve(a, np.ones(n))
            if np.all(f @ v <= 1 + 1e-9):
                found.append(v)
        found = np.unique(np.round(found, 9), axis=0)
        mine = np.unique(np.round(b.vertices, 9), axis=0)
        assert found.shape == mine.shape and np.allclose(found, mine)


def test_cut_corner_contains_ball_for_small_eps():
    n = 3
    b = cut_corner_cube(n, 0.2)
    assert b.inradius >= 1 - 1e-12
    assert b.circumradius < math.sqrt(n)


def test_cut_corner_domain():
    with pytest.raises(DomainError):
        cut_corner_cube(2, 0.6)


def test_degenerate_bodies_rejected():
    with pytest.raises(ValidationError, match="empty interior"):
        SymmetricBody("V", np.array([[1.0, 0.0], [2.0, 0.0]]))
    with pytest.raises(ValidationError, match="unbounded"):
        SymmetricBody("H", np.array([[1.0, 0.0]]))
    with pytest.raises(ValidationError):
        SymmetricBody("Q", np.eye(2))
    with pytest.raises(ValidationError):
        SymmetricBody("V", np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_json_round_trip_sorted():
    b = _body(3)
    doc = b.to_dict()
    assert set(doc) == {"dim", "form", "generators"}
    assert doc["generators"] == sorted(doc["generators"])
    again = SymmetricBody.from_json(b.to_json())
    x = np.random.default_rng(0).standard_normal((50, 3))
    assert np.allclose(again.gauge_many(x), b.gauge_many(x))


def test_from_dict_shape_mismatch():
    with pytest.raises(ValidationError):
        SymmetricBody.from_dict({"dim": 3, "form": "V", "generators": [[1, 0], [0, 1]]})


def test_rotation_and_scaling():
    b = _body(5)
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)))
    x = np.random.default_rng(2).standard_normal((20, 3))
    assert np.allclose(b.rotated(q).gauge_many(x @ q.T), b.gauge_many(x))
    assert np.allclose(b.scaled(2.0).gauge_many(x), b.gauge_many(x) / 2.0)
    h = polar(b)
    assert np.allclose(h.scaled(2.0).gauge_many(x), h.gauge_many(x) / 2.0)


def test_z_bodies_polar_pair_and_radius_bound():
    for n in (2, 3, 4):
        m = random_isotropic(n, 2 * n, 7)
        z, zs = z_bodies(m)
        assert zs.circumradius <= math.sqrt(n) + 1e-9
        assert z.inradius >= 1 / math.sqrt(n) - 1e-9
        u = np.random.default_rng(0).standard_normal((30, n))
        assert np.allclose(z.support_many(u), zs.gauge_many(u))


def test_hull_gauge_matches_symmetric_gauge():
    b = _body(9)
    pts_ = np.vstack([b.generators, -b.generators])
    x = np.random.default_rng(4).standard_normal((40, 3))
    assert np.allclose(hull_gauge(pts_, x), b.gauge_many(x))
    assert ConvexHull(pts_).volume > 0
