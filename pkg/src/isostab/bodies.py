"""Origin-symmetric convex polytopes in vertex (V) or facet (H) form.

A V-form body is ``conv{+-g_i}``; an H-form body is ``{x : |<x, g_i>| <= 1}``.
The two forms are polar to each other for the same generator list, so
``polar`` only flips the tag.

Pointwise ``gauge``/``support`` solve the defining linear programs.  The
vectorized ``gauge_many``/``support_many`` used by the Monte-Carlo code go
through the facet list of ``conv{+-g_i}`` computed once with qhull.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import DomainError, NumericError, ValidationError
from .isotropy import IsotropicMeasure, verify_isotropy


def _sorted_rows(a: np.ndarray) -> np.ndarray:
    order = sorted(range(a.shape[0]), key=lambda i: tuple(a[i]))
    return a[order]


def _unique_rows(a: np.ndarray, decimals: int = 9) -> np.ndarray:
    _, idx = np.unique(np.round(a, decimals), axis=0, return_index=True)
    return a[np.sort(idx)]


@dataclass(frozen=True, eq=False)
class SymmetricBody:
    form: str
    generators: np.ndarray

    def __post_init__(self):
        if self.form not in ("V", "H"):
            raise ValidationError(f"form must be 'V' or 'H', got {self.form!r}")
        g = np.atleast_2d(np.asarray(self.generators, dtype=float)).copy()
        if not np.all(np.isfinite(g)):
            raise ValidationError("non-finite generator entries")
        if g.shape[0] < g.shape[1] or np.linalg.matrix_rank(g, tol=1e-10) < g.shape[1]:
            kind = "body has empty interior" if self.form == "V" else "body is unbounded"
            raise ValidationError(f"generators do not span R^{g.shape[1]}: {kind}")
        g.setflags(write=False)
        object.__setattr__(self, "generators", g)

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    # -- facet structure of conv{+-g} -------------------------------------
    @cached_property
    def dual_facets(self) -> np.ndarray:
        """Normals ``f`` with ``conv{+-g} = {y : <f, y> <= 1}``."""
        pts = np.vstack([self.generators, -self.generators])
        try:
            hull = ConvexHull(pts)
        except QhullError as exc:
            raise NumericError(f"qhull failed on generator hull: {exc}") from exc
        a, b = hull.equations[:, :-1], hull.equations[:, -1]
        f = a / (-b)[:, None]
        f = _unique_rows(f)
        f.setflags(write=False)
        return f

    @cached_property
    def vertices(self) -> np.ndarray:
        if self.form == "V":
            pts = np.vstack([self.generators, -self.generators])
            hull = ConvexHull(pts)
            v = pts[np.sort(hull.vertices)]
        else:
            v = self.dual_facets
        v = np.array(v)
        v.setflags(write=False)
        return v

    @cached_property
    def facet_normals(self) -> np.ndarray:
        """``f`` with ``body = {x : <f, x> <= 1}`` (both signs included)."""
        if self.form == "V":
            return self.dual_facets
        g = self.generators
        return np.vstack([g, -g])

    @property
    def inradius(self) -> float:
        return 1.0 / float(np.linalg.norm(self.facet_normals, axis=1).max())

    @property
    def circumradius(self) -> float:
        return float(np.linalg.norm(self.vertices, axis=1).max())

    # -- evaluation ---------------------------------------------------------
    def gauge_many(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.form == "H":
            return np.abs(x @ self.generators.T).max(axis=1)
        return np.maximum((x @ self.dual_facets.T).max(axis=1), 0.0)

    def support_many(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        if self.form == "V":
            return np.abs(u @ self.generators.T).max(axis=1)
        return np.maximum((u @ self.dual_facets.T).max(axis=1), 0.0)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        return self.gauge_many(x) <= 1.0 + tol

    # -- transforms ---------------------------------------------------------
    def scaled(self, s: float) -> "SymmetricBody":
        if not s > 0:
            raise DomainError("scale factor must be positive")
        g = self.generators * s if self.form == "V" else self.generators / s
        return SymmetricBody(self.form, g)

    def rotated(self, rotation: np.ndarray) -> "SymmetricBody":
        return SymmetricBody(self.form, self.generators @ np.asarray(rotation, dtype=float).T)

    def to_dict(self) -> dict:
        g = _sorted_rows(np.asarray(self.generators))
        return {"dim": self.dim, "form": self.form, "generators": [[float(v) for v in row] for row in g]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "SymmetricBody":
        try:
            g = np.array(doc["generators"], dtype=float)
            n = int(doc["dim"])
            form = doc["form"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed body document: {exc}") from exc
        if g.ndim != 2 or g.shape[1] != n:
            raise ValidationError(f"generators must be vectors of length {n}")
        return cls(form, g)

    @classmethod
    def from_json(cls, text: str) -> "SymmetricBody":
        return cls.from_dict(json.loads(text))


def polar(b: SymmetricBody) -> SymmetricBody:
    return SymmetricBody("H" if b.form == "V" else "V", b.generators)


def gauge(b: SymmetricBody, x) -> float:
    """Minkowski functional of ``b`` at ``x``.

    V-form bodies solve ``min sum |alpha_i|`` subject to ``x = sum alpha_i g_i``.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValidationError("point must be finite")
    g = b.generators
    if b.form == "H":
        return float(np.abs(g @ x).max())
    k = g.shape[0]
    a_eq = np.hstack([g.T, -g.T])
    res = linprog(np.ones(2 * k), A_eq=a_eq, b_eq=x, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericError(f"gauge LP failed: {res.message}",
                           residual=float(np.linalg.norm(a_eq @ res.x - x)) if res.x is not None else None)
    return float(res.fun)


def support(b: SymmetricBody, u) -> float:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValidationError("direction must be finite")
    g = b.generators
    if b.form == "V":
        return float(np.abs(g @ u).max())
    a_ub = np.vstack([g, -g])
    res = linprog(-u, A_ub=a_ub, b_ub=np.ones(a_ub.shape[0]), bounds=(None, None), method="highs")
    if res.status == 3:
        raise NumericError("support LP unbounded: H-form body is not bounded")
    if res.status != 0:
        raise NumericError(f"support LP failed: {res.message}")
    return float(-res.fun)


def make_standard(kind: str, n: int, facets: int = 64) -> SymmetricBody:
    """``cross`` (B_1), ``cube`` (B_inf) or ``ball_poly`` (inscribed polytope near B_2).

    ``facets`` is the number of vertices of the ball polytope (``facets/2``
    antipodal pairs), equally spaced for ``n = 2``.
    """
    if n < 2:
        raise DomainError("dimension must be at least 2")
    if kind == "cross":
        return SymmetricBody("V", np.eye(n))
    if kind == "cube":
        return SymmetricBody("H", np.eye(n))
    if kind == "ball_poly":
        m = max(facets // 2, n)
        if n == 2:
            ang = np.pi * np.arange(m) / m
            return SymmetricBody("V", np.column_stack([np.cos(ang), np.sin(ang)]))
        rng = np.random.default_rng(12345 + n)
        g = rng.standard_normal((m, n))
        return SymmetricBody("V", g / np.linalg.norm(g, axis=1, keepdims=True))
    raise ValidationError(f"unknown standard body {kind!r}")


def cut_corner_cube(n: int, eps: float) -> SymmetricBody:
    """Cube with every vertex ``v`` cut by ``<x, v> <= (1-eps) <v, v>``."""
    if not 0.0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    corners = np.array([(1.0,) + s for s in itertools.product((1.0, -1.0), repeat=n - 1)])
    return SymmetricBody("H", np.vstack([np.eye(n), corners / ((1.0 - eps) * n)]))


def z_bodies(m: IsotropicMeasure) -> tuple[SymmetricBody, SymmetricBody]:
    """``conv supp m`` and its polar ``{x : |<x, u_i>| <= 1}``."""
    check = verify_isotropy(m)
    z = SymmetricBody("V", m.directions)
    z_star = SymmetricBody("H", m.directions)
    if check.ok:
        r = z_star.circumradius
        assert r <= math.sqrt(m.dim) + 1e-9, f"polar body escapes sqrt(n) ball: {r}"
    return z, z_star


def hull_gauge(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gauge of the (not necessarily symmetric) hull of ``points``; origin must be interior."""
    hull = ConvexHull(np.asarray(points, dtype=float))
    a, b = hull.equations[:, :-1], hull.equations[:, -1]
    if np.any(b >= 0):
        raise ValidationError("origin is not interior to the hull")
    f = a / (-b)[:, None]
    return np.maximum((np.atleast_2d(x) @ f.T).max(axis=1), 0.0)
