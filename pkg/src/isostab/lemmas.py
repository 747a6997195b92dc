"""Randomized property checks of the geometric and metric comparison lemmas.

Every check draws instances inside the lemma's hypothesis region and tests
the conclusion with its explicit constants.  Samplers that fail to reach
the hypothesis region within the retry cap are counted, not fatal.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .bodies import SymmetricBody, cut_corner_cube, hull_gauge, z_bodies
from .gauss import cap_measure_check, ell_paired
from .isotropy import OrthonormalFrame, cross_measure, random_isotropic
from .metrics import dilation_check, groemer_check, hausdorff_points, hw_check, volume
from .sampling import block_generator

RETRIES = 50
TOL = 1e-9


@dataclass
class LemmaResult:
    name: str
    trials: int = 0
    violations: int = 0
    sampler_failures: int = 0
    worst_margin: float = math.inf
    worst_case: dict | None = None

    def add(self, margin: float, case: dict | None = None, tol: float = TOL) -> None:
        self.trials += 1
        if margin < -tol:
            self.violations += 1
        if margin < self.worst_margin:
            self.worst_margin = float(margin)
            self.worst_case = case

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        if not math.isfinite(d["worst_margin"]):
            d["worst_margin"] = None
        return d


def _unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _angle(a, b):
    return math.atan2(np.linalg.norm(a - b), np.linalg.norm(a + b)) * 2.0


def _ball_point(rng, n, radius):
    return _unit(rng, n) * radius * rng.random() ** (1.0 / n)


# -- planar scalar products ------------------------------------------------------------

def check_abs_scalar_prod(res: LemmaResult, rng) -> None:
    for _ in range(RETRIES):
        a, b = rng.uniform(0, 2 * math.pi, 2)
        u = np.array([math.cos(a), math.sin(a)])
        up = np.array([math.cos(b), math.sin(b)])
        c = abs(float(u @ up))
        eta_max = min(math.acos(min(c, 1.0)), math.pi / 8) * (1 - 1e-12)
        if eta_max <= 1e-9:
            continue
        eta = eta_max if rng.random() < 0.5 else eta_max * rng.random()
        dm, dp = (u - up) / np.linalg.norm(u - up), (u + up) / np.linalg.norm(u + up)
        lo, hi = math.cos(3 * math.pi / 8), math.cos(math.pi / 8)
        for _ in range(RETRIES):
            g = rng.uniform(0, 2 * math.pi)
            v = np.array([math.cos(g), math.sin(g)])
            if lo <= abs(v @ dm) <= hi and lo <= abs(v @ dp) <= hi:
                lhs = abs(abs(v @ u) - abs(v @ up))
                res.add(lhs - eta / 5, {"u": a, "u_prime": b, "v": g, "eta": eta})
                return
    res.sampler_failures += 1


# -- simplex norm bound ---------------------------------------------------------------------

def check_simplex_angle(res: LemmaResult, rng, n: int) -> None:
    for _ in range(RETRIES):
        conc = [0.2, 1.0, 5.0][int(rng.integers(3))]
        x = rng.dirichlet(np.full(n, conc))
        norm = float(np.linalg.norm(x))
        theta = float(np.min(np.arccos(np.clip(x / norm, -1, 1))))
        eps_max = min(theta, 0.5 * (1 - 1e-12))
        if eps_max <= 0:
            continue
        eps = eps_max if rng.random() < 0.5 else eps_max * rng.random()
        res.add(1 - 4.0 ** (1 - n) * eps - norm, {"n": n, "eps": eps, "x": x.tolist()}, tol=1e-12)
        return
    res.sampler_failures += 1


# -- near-crosspolytope hulls --------------------------------------------------------------------

def _perturbed_vertex_set(rng, n, radius, extra):
    base = np.vstack([np.eye(n), -np.eye(n)])
    pts = [p + _ball_point(rng, n, radius) for p in base]
    for _ in range(extra):
        pts.append(base[rng.integers(2 * n)] + _ball_point(rng, n, radius))
    return base, np.array(pts)


def check_close_to_cross(res: LemmaResult, rng, n: int) -> None:
    limit = 1 / math.sqrt(n)
    base, q = _perturbed_vertex_set(rng, n, limit * rng.random() * 0.999, int(rng.integers(4)))
    alpha = hausdorff_points(base, q)
    if not 0 < alpha < limit:
        res.sampler_failures += 1
        return
    s = math.sqrt(n) * alpha
    outer = (1 + s) - float(np.abs(q).sum(axis=1).max())
    try:
        inner = 1 - float(hull_gauge(q, (1 - s) * base).max())
    except (QhullError, ValueError):
        inner = -math.inf
    res.add(min(inner, outer), {"n": n, "alpha": alpha})


def check_close_simplex(res: LemmaResult, rng, n: int) -> None:
    limit = 1 / (2 * math.sqrt(n))
    base = np.vstack([np.eye(n), -np.eye(n)])
    for _ in range(RETRIES):
        target = limit * rng.random() * 0.999
        reps = [base[i] + _ball_point(rng, n, target) for i in range(n)]
        reps += [base[rng.integers(2 * n)] + _ball_point(rng, n, target) for _ in range(int(rng.integers(3)))]
        u = np.array([r / np.linalg.norm(r) for r in reps])
        eta = hausdorff_points(np.vstack([u, -u]), base)
        if 0 < eta < limit:
            break
    else:
        res.sampler_failures += 1
        return
    p = SymmetricBody("H", u)
    s = math.sqrt(n) * eta
    corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T
    inner = 1 - float(p.gauge_many((1 - s) * corners).max())
    outer = (1 + 2 * s) - float(np.abs(p.vertices).max())
    res.add(min(inner, outer), {"n": n, "eta": eta})


# -- Gaussian cones ------------------------------------------------------------------------------

def check_cone(res: LemmaResult, rng) -> None:
    n = int(rng.integers(2, 7))
    alpha = rng.uniform(0, math.pi / 2)
    if alpha <= 0:
        res.sampler_failures += 1
        return
    exact, bound, _ = cap_measure_check(n, alpha)
    res.add(exact - bound, {"n": n, "alpha": alpha}, tol=1e-15)


# -- l-norm variation ---------------------------------------------------------------------------

def check_ell_difference(res: LemmaResult, rng, n: int, samples: int, seed: int, index: int) -> None:
    for _ in range(RETRIES):
        k = int(rng.integers(n + 1, 2 * n + 4))
        g = np.array([_unit(rng, n) * rng.uniform(0.5, 1.0) for _ in range(k)])
        if np.linalg.matrix_rank(g) < n:
            continue
        outer = SymmetricBody("V", g)
        inner = SymmetricBody("V", g * rng.uniform(0.3, 1.0, (k, 1)))
        vo, vi = volume(outer), volume(inner)
        if (vo - vi) / vo < 0.02:
            continue
        r = outer.circumradius * (1.0 if rng.random() < 0.5 else rng.uniform(1.0, 1.5))
        _, diffs = ell_paired([outer, inner], samples, seed, stream=f"lemmas/elldiff/{index}")
        lhs = diffs[1]
        rhs = (n / (2 * math.pi * math.e)) ** (n / 2) * r ** (-(n + 1)) * (vo - vi)
        res.add(lhs.value - rhs + 3 * lhs.std_error, {"n": n, "lhs": lhs.value, "rhs": rhs}, tol=0.0)
        return
    res.sampler_failures += 1


# -- cube cut by a hyperplane ----------------------------------------------------------------------

def volumebound_constant(n: int) -> float:
    return 2.0 ** (n + 4) * n ** (n + 3)


def _tilt(rng, w, eta):
    """Unit vector at angle ``<= eta`` from unit ``w``."""
    p = _unit(rng, w.size)
    p -= (p @ w) * w
    p /= np.linalg.norm(p)
    a = eta * rng.random()
    return math.cos(a) * w + math.sin(a) * p


def check_volume_bound(res: LemmaResult, rng, n: int) -> None:
    w, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = w.T
    uk = _unit(rng, n)
    delta = min(min(_angle(uk, wi), _angle(uk, -wi)) for wi in w)
    eta = delta / volumebound_constant(n) * rng.random()
    if eta <= 0:
        res.sampler_failures += 1
        return
    u = np.array([_tilt(rng, wi, eta) for wi in w])
    hs = np.vstack([np.hstack([u, -np.ones((n, 1))]), np.hstack([-u, -np.ones((n, 1))]),
                    np.hstack([uk, [-1.0]])])
    try:
        pts = HalfspaceIntersection(hs, np.zeros(n)).intersections
        vol = float(ConvexHull(pts).volume)
    except QhullError:
        res.sampler_failures += 1
        return
    bound = (1 - delta / (16 * n ** (n + 1))) * 2.0 ** n
    res.add(bound - vol, {"n": n, "delta": delta, "eta": eta}, tol=1e-12)


# -- metric comparison lemmas --------------------------------------------------------------------

def _random_pair_bodies(rng, n: int):
    """Two bodies in the sandwich ``n^{-1/2} B ⊆ K ⊆ sqrt(n) B``."""
    seeds = rng.integers(0, 2 ** 31, 2)
    out = []
    for s in seeds:
        # isotropic Z / Z* bodies or a cut-corner cube
        kind = int(rng.integers(3))
        if kind == 2 and n <= 4:
            out.append(cut_corner_cube(n, float(rng.uniform(0.01, 0.3))))
            continue
        m = random_isotropic(n, int(rng.integers(n, 2 * n + 2)), int(s))
        z, zs = z_bodies(m)
        out.append(zs if kind == 0 else z)
    return out


def check_metric_lemmas(results: dict, rng, n: int, trial: int) -> None:
    k, l = _random_pair_bodies(rng, n)
    for c in groemer_check(k, l) + dilation_check(k, l):
        if c.ok is None:
            results[c.name].sampler_failures += 1
        else:
            results[c.name].add(c.margin, {"n": n, "trial": trial})
    s = rng.integers(0, 2 ** 31, 2)
    mu = random_isotropic(n, int(rng.integers(n, 2 * n + 2)), int(s[0]))
    if rng.random() < 0.5:
        r, _ = np.linalg.qr(block_generator(int(s[1]), "lemmas/hw", 0).standard_normal((n, n)))
        nu = cross_measure(OrthonormalFrame(r))
    else:
        nu = random_isotropic(n, int(rng.integers(n, 2 * n + 2)), int(s[1]))
    c = hw_check(mu, nu)
    results["wasserstein_hausdorff"].add(c.margin, {"n": n, "trial": trial})


GEOMETRIC = ("abs_scalar_product", "simplex_angle", "close_to_cross", "close_simplex",
             "cone_gaussian_lower", "ell_difference", "volume_bound")
METRIC = ("wasserstein_hausdorff", "groemer", "groemer_specialized", "dilation_sandwich", "dilation_converse")


def lemma_property_suite(seed: int = 0, trials: int = 10_000, ell_samples: int = 10_000,
                         metric_trials: int = 100, only: tuple[str, ...] | None = None) -> dict:
    if trials < 100:
        raise ValueError("at least 100 trials per lemma")
    names = [g for g in GEOMETRIC if only is None or g in only]
    results = {name: LemmaResult(name) for name in names}

    def rng(name):
        return block_generator(seed, f"lemmas/{name}", 0)

    runners: dict[str, Callable[[int, np.random.Generator], None]] = {
        "abs_scalar_product": lambda i, g: check_abs_scalar_prod(results["abs_scalar_product"], g),
        "simplex_angle": lambda i, g: check_simplex_angle(results["simplex_angle"], g, 2 + i % 3),
        "close_to_cross": lambda i, g: check_close_to_cross(results["close_to_cross"], g, 2 + i % 3),
        "close_simplex": lambda i, g: check_close_simplex(results["close_simplex"], g, 2 + i % 3),
        "cone_gaussian_lower": lambda i, g: check_cone(results["cone_gaussian_lower"], g),
        "ell_difference": lambda i, g: check_ell_difference(results["ell_difference"], g, 2 + i % 2,
                                                           ell_samples, seed, i),
        "volume_bound": lambda i, g: check_volume_bound(results["volume_bound"], g, 2 + i % 2),
    }
    for name in names:
        g = rng(name)
        for i in range(trials):
            runners[name](i, g)
    metric = {}
    if metric_trials and (only is None or any(m in only for m in METRIC)):
        metric = {name: LemmaResult(name) for name in METRIC}
        g = rng("metric")
        for n in (2, 3, 4):
            for i in range(metric_trials):
                check_metric_lemmas(metric, g, n, i)
    all_results = {**results, **metric}
    return {
        "seed": seed,
        "trials": trials,
        "metric_trials": metric_trials,
        "lemmas": {k: v.to_dict() for k, v in all_results.items()},
        "ok": all(v.ok for v in all_results.values()),
    }
