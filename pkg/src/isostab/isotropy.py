"""Even discrete isotropic measures on the unit sphere.

An even measure is stored by one representative direction per antipodal pair
together with the total mass of the pair, so that the isotropy condition reads
``sum_i c_i u_i u_i^T = Id``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import nnls

from .errors import ConvergenceFailure, DegenerateConfiguration, DomainError, ValidationError
from .sampling import stream_key

ISOTROPY_TOL = 1e-9
UNIT_TOL = 1e-12
ANTIPODAL_TOL = 1e-10
RANK_TOL = 1e-10


def _normalize_sign(u: np.ndarray) -> np.ndarray:
    """Flip each row so that its first non-negligible coordinate is positive."""
    u = np.array(u, dtype=float, copy=True)
    for row in u:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return u


@dataclass(frozen=True, eq=False)
class IsotropicMeasure:
    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.directions, dtype=float))
        c = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if u.shape[0] != c.shape[0]:
            raise ValidationError(f"{u.shape[0]} directions but {c.shape[0]} weights")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(c))):
            raise ValidationError("non-finite entries in measure")
        u = _normalize_sign(u)
        u.setflags(write=False)
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "directions", u)
        object.__setattr__(self, "weights", c)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    def moment(self) -> np.ndarray:
        u, c = self.directions, self.weights
        return (u * c[:, None]).T @ u

    def support(self) -> np.ndarray:
        """All ``2k`` support points ``+-u_i``."""
        return np.vstack([self.directions, -self.directions])

    def expanded(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points with masses ``c_i/2`` each."""
        half = self.weights / 2.0
        return self.support(), np.concatenate([half, half])

    def reordered(self, order) -> "IsotropicMeasure":
        order = list(order)
        rest = [i for i in range(self.size) if i not in order]
        idx = order + rest
        return IsotropicMeasure(self.directions[idx], self.weights[idx])

    def rotated(self, rotation: np.ndarray) -> "IsotropicMeasure":
        return IsotropicMeasure(self.directions @ np.asarray(rotation).T, self.weights)

    def to_dict(self) -> dict:
        order = sorted(range(self.size), key=lambda i: tuple(self.directions[i]))
        return {
            "dim": self.dim,
            "atoms": [{"u": [float(x) for x in self.directions[i]], "c": float(self.weights[i])}
                      for i in order],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "IsotropicMeasure":
        try:
            n = int(doc["dim"])
            atoms = doc["atoms"]
            u = np.array([a["u"] for a in atoms], dtype=float).reshape(len(atoms), n)
            c = np.array([a["c"] for a in atoms], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed measure document: {exc}") from exc
        return cls(u, c)

    @classmethod
    def from_json(cls, text: str) -> "IsotropicMeasure":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class OrthonormalFrame:
    vectors: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.vectors, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValidationError("frame must be a square array of row vectors")
        gram = w @ w.T
        off = gram - np.diag(np.diag(gram))
        if np.max(np.abs(np.diag(gram) - 1.0)) > 1e-10 or np.max(np.abs(off), initial=0.0) > 1e-10:
            raise ValidationError("frame vectors are not orthonormal within 1e-10")
        if abs(abs(np.linalg.det(w)) - 1.0) > 1e-9:
            raise ValidationError("frame determinant is not +-1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "vectors", w)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def standard(cls, n: int) -> "OrthonormalFrame":
        return cls(np.eye(n))


class IsotropyCheck(NamedTuple):
    residual: float
    ok: bool
    mass_gap: float
    max_weight: float


def validate_atoms(m: IsotropicMeasure) -> None:
    if m.size == 0:
        raise ValidationError("measure has no atoms")
    norms = np.linalg.norm(m.directions, axis=1)
    for i, (r, c) in enumerate(zip(norms, m.weights)):
        if abs(r - 1.0) > UNIT_TOL:
            raise ValidationError(f"atom {i} direction has norm {r!r}, expected 1", index=i)
        if not c > 0:
            raise ValidationError(f"atom {i} has nonpositive weight {c!r}", index=i)
    dots = np.abs(m.directions @ m.directions.T)
    np.fill_diagonal(dots, 0.0)
    i, j = np.unravel_index(np.argmax(dots), dots.shape)
    if m.size > 1 and dots[i, j] > 1.0 - ANTIPODAL_TOL:
        raise ValidationError(f"atoms {min(i, j)} and {max(i, j)} coincide up to sign",
                              index=int(max(i, j)))


def verify_isotropy(m: IsotropicMeasure, tol: float = ISOTROPY_TOL) -> IsotropyCheck:
    """Frobenius residual of ``sum c_i u_i u_i^T - Id`` and derived diagnostics."""
    if tol < 0:
        raise DomainError("tolerance must be nonnegative")
    validate_atoms(m)
    residual = float(np.linalg.norm(m.moment() - np.eye(m.dim)))
    return IsotropyCheck(residual, residual <= tol, float(abs(m.weights.sum() - m.dim)),
                         float(m.weights.max()))


def cross_measure(frame: OrthonormalFrame) -> IsotropicMeasure:
    return IsotropicMeasure(frame.vectors, np.ones(frame.dim))


def equiangular_measure(n_lines: int = 3) -> IsotropicMeasure:
    """Planar measure with ``n_lines`` equally spaced lines and weights ``2/n_lines``."""
    ang = np.pi * np.arange(n_lines) / n_lines
    return IsotropicMeasure(np.column_stack([np.cos(ang), np.sin(ang)]),
                            np.full(n_lines, 2.0 / n_lines))


def perturbed_cross(n: int, alpha: float) -> IsotropicMeasure:
    """Cross measure with the ``e_n`` pair split into two pairs tilted by ``+-alpha`` toward ``e_1``.

    The split atoms carry ``1/(2 cos^2 alpha)`` each and ``e_1`` keeps
    ``1 - tan^2 alpha``, which restores isotropy exactly; ``alpha -> 0``
    recovers the cross measure.
    """
    if n < 2:
        raise DomainError("dimension must be at least 2")
    if not 0.0 < alpha < math.pi / 4:
        raise DomainError("alpha must lie in (0, pi/4)")
    eye = np.eye(n)
    tilt = [math.cos(alpha) * eye[n - 1] + s * math.sin(alpha) * eye[0] for s in (1.0, -1.0)]
    u = np.vstack([eye[: n - 1], tilt])
    c = np.concatenate([[1.0 - math.tan(alpha) ** 2], np.ones(n - 2),
                        np.full(2, 0.5 / math.cos(alpha) ** 2)])
    return IsotropicMeasure(u, c)


def _isotropy_rng(seed: int, n: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, f"random_isotropic/{n}/{k}")))


def _draw_directions(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    out: list[np.ndarray] = []
    while len(out) < k:
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        if all(abs(float(v @ w)) < 1.0 - 1e-6 for w in out):
            out.append(v)
    return np.array(out)


def _target_weights(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    if k == n:
        return np.ones(n)
    base = n / k
    c = n * rng.dirichlet(np.full(k, 2.0))
    cap = 0.5 * (1.0 + base)
    if c.max() > cap:
        lam = (cap - base) / (c.max() - base)
        c = lam * c + (1.0 - lam) * base
    return c * (n / c.sum())


def _moment(u, c):
    return (u * c[:, None]).T @ u


def _inv_sqrt(m):
    vals, vecs = np.linalg.eigh(m)
    return (vecs / np.sqrt(vals)) @ vecs.T


def isotropic_position(directions, weights, max_iter: int = 500, tol: float = 1e-10):
    """Fixed-point iteration ``v <- normalize(M^{-1/2} v)`` for prescribed weights.

    Returns ``(directions, residual, converged)``.
    """
    u = np.asarray(directions, dtype=float)
    c = np.asarray(weights, dtype=float)
    n = u.shape[1]
    prev = np.inf
    residual = np.inf
    for _ in range(max_iter):
        m = _moment(u, c)
        residual = float(np.linalg.norm(m - np.eye(n)))
        if residual < tol:
            return u, residual, True
        if prev - residual < 1e-14 * max(prev, 1.0) and prev < np.inf:
            return u, residual, False
        prev = residual
        u = u @ _inv_sqrt(m)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    residual = float(np.linalg.norm(_moment(u, c) - np.eye(n)))
    return u, residual, residual < tol


def _sym_design(u: np.ndarray) -> np.ndarray:
    """Columns are ``vec(u_i u_i^T)`` over the full ``n*n`` entries."""
    return np.einsum("ki,kj->ijk", u, u).reshape(u.shape[1] ** 2, u.shape[0])


def random_isotropic(n: int, k: int, seed: int, max_iter: int = 5000) -> IsotropicMeasure:
    """Random even isotropic measure with ``k`` atoms in ``R^n``.

    Fresh directions are brought to isotropic position for a random weight
    vector in the open box ``(0, 1)^k`` of mass ``n``; if the iteration stalls
    the weights are re-solved by nonnegative least squares.
    """
    if n < 1 or k < n:
        raise DomainError(f"need k >= n >= 1, got n={n}, k={k}")
    rng = _isotropy_rng(seed, n, k)
    u0 = _draw_directions(rng, n, k)
    c = _target_weights(rng, n, k)
    u, residual, converged = isotropic_position(u0, c, max_iter=max_iter)
    if not converged:
        w, _ = nnls(_sym_design(u), np.eye(n).ravel())
        r2 = float(np.linalg.norm(_moment(u, w) - np.eye(n)))
        if r2 <= ISOTROPY_TOL and np.all(w > 0):
            return IsotropicMeasure(u, w)
        raise ConvergenceFailure("isotropic position iteration did not converge", min(residual, r2))
    return IsotropicMeasure(u, c)


def sparsify(m: IsotropicMeasure) -> IsotropicMeasure:
    """Caratheodory reduction to at most ``n(n+1)/2`` atoms from the input support."""
    validate_atoms(m)
    n = m.dim
    d = n * (n + 1) // 2
    iu = np.triu_indices(n)
    u = m.directions.copy()
    c = m.weights.copy()
    idx = np.arange(m.size)
    while True:
        a = np.einsum("ki,kj->kij", u, u)[:, iu[0], iu[1]].T  # (d, k)
        k = a.shape[1]
        s = np.linalg.svd(a, compute_uv=False)
        rank = int(np.sum(s > RANK_TOL * s[0]))
        if rank == k:
            break
        if k <= d and rank >= k:
            break
        _, _, vt = np.linalg.svd(a)
        lam = vt[-1]
        if np.max(lam) <= 0:
            lam = -lam
        pos = lam > RANK_TOL * np.max(np.abs(lam))
        if not np.any(pos):
            raise DegenerateConfiguration("inconsistent affine dependence in sparsify")
        ratios = np.full(k, np.inf)
        ratios[pos] = c[pos] / lam[pos]
        t = ratios.min()
        drop = int(np.flatnonzero(ratios <= t * (1 + 1e-12))[0])
        c = c - t * lam
        keep = np.ones(k, dtype=bool)
        keep[drop] = False
        keep &= c > 1e-14
        u, c, idx = u[keep], c[keep], idx[keep]
    # clean up accumulated drift on the final support
    w, _ = nnls(_sym_design(u), np.eye(n).ravel())
    if np.all(w > 0) and np.linalg.norm(_moment(u, w) - np.eye(n)) <= np.linalg.norm(_moment(u, c) - np.eye(n)):
        c = w
    return IsotropicMeasure(m.directions[idx], c)


def _subset_value(v: np.ndarray, subset) -> float:
    return float(np.linalg.det(v[list(subset)]) ** 2)


def select_det_basis(m: IsotropicMeasure, exhaustive_limit: int = 20) -> tuple[tuple[int, ...], float]:
    """n-subset maximizing ``prod c_i * det[u_i]^2``.

    By Cauchy-Binet the values over all subsets sum to ``det(Id)=1``, so the
    best subset of an isotropic measure has value at least ``1/binom(k, n)``.
    """
    n, k = m.dim, m.size
    if k < n:
        raise DomainError("need at least n atoms")
    v = m.directions * np.sqrt(m.weights)[:, None]
    best: tuple[int, ...] = tuple(range(n))
    best_val = -1.0
    if k <= exhaustive_limit:
        for sub in itertools.combinations(range(k), n):
            val = _subset_value(v, sub)
            if val > best_val:
                best, best_val = sub, val
    else:
        chosen: list[int] = []
        for _ in range(n):
            rest = [i for i in range(k) if i not in chosen]
            if chosen:
                q, _ = np.linalg.qr(v[chosen].T)
                resid = v[rest] - (v[rest] @ q) @ q.T
            else:
                resid = v[rest]
            chosen.append(rest[int(np.argmax(np.linalg.norm(resid, axis=1)))])
        best_val = _subset_value(v, chosen)
        improved = True
        while improved:
            improved = False
            for pos in range(n):
                for j in range(k):
                    if j in chosen:
                        continue
                    trial = chosen.copy()
                    trial[pos] = j
                    val = _subset_value(v, trial)
                    if val > best_val * (1 + 1e-12):
                        chosen, best_val, improved = trial, val, True
        best = tuple(sorted(chosen))
    if best_val < 1e-14:
        raise DegenerateConfiguration("every n-subset of directions is (numerically) singular")
    if verify_isotropy(m).ok:
        floor = 1.0 / math.comb(k, n)
        assert best_val >= floor - 1e-10, (best_val, floor)
    return tuple(int(i) for i in best), best_val


@dataclass(frozen=True)
class NearOrthonormal:
    frame: OrthonormalFrame
    bound: float
    realized: float
    regime: str  # "clustered" (every atom near the frame) or "light_atoms" (small atoms ignored)


@dataclass(frozen=True)
class NotClustered:
    witness: int
    reason: str


def gram_schmidt_frame(u: np.ndarray) -> np.ndarray:
    """Orthonormalize rows in order, keeping ``<w_i, u_i> > 0``."""
    q, r = np.linalg.qr(np.asarray(u, dtype=float).T)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return (q * signs).T


def near_orthonormal_basis(m: IsotropicMeasure, eta: float):
    """Orthonormal frame close to the first ``n`` atoms, or ``NotClustered``.

    Every atom beyond the first ``n`` must either lie within angle ``eta`` of
    a designated atom (up to sign) or carry weight at most ``eta**2``.  When no
    light atoms are needed the whole signed support is within ``4 sqrt(n) eta``
    of the frame in Hausdorff distance; otherwise the designated atoms are
    within angle ``3 sqrt(k) eta`` of their frame vectors.
    """
    n, k = m.dim, m.size
    if not 0.0 < eta < 1.0 / (3 * n):
        raise DomainError(f"eta must lie in (0, 1/(3n)) = (0, {1.0 / (3 * n):.6g})")
    u, c = m.directions, m.weights
    cluster = list(range(n)) + [-1] * (k - n)
    light = False
    for j in range(n, k):
        dots = np.abs(u[:n] @ u[j])
        i = int(np.argmax(dots))
        if dots[i] >= math.cos(eta):
            cluster[j] = i
        elif c[j] <= eta ** 2:
            light = True
        else:
            return NotClustered(j, f"atom {j} is farther than eta from every designated atom "
                                   f"and has weight {c[j]:.6g} > eta^2")
    if light and not eta < 1.0 / (3 * math.sqrt(k)):
        return NotClustered(int(np.argmax([cl < 0 for cl in cluster])),
                            "light atoms present but eta >= 1/(3 sqrt(k))")
    w = gram_schmidt_frame(u[:n])
    frame = OrthonormalFrame(w)
    if not light:
        signed = np.array([u[j] * (1.0 if u[j] @ w[cluster[j]] >= 0 else -1.0) for j in range(k)])
        d = np.linalg.norm(signed[:, None, :] - w[None, :, :], axis=2)
        realized = float(max(d.min(axis=1).max(), d.min(axis=0).max()))
        return NearOrthonormal(frame, 4 * math.sqrt(n) * eta, realized, "clustered")
    ang = np.arccos(np.clip(np.sum(u[:n] * w, axis=1), -1.0, 1.0))
    return NearOrthonormal(frame, 3 * math.sqrt(k) * eta, float(ang.max()), "light_atoms")


@dataclass(frozen=True)
class Infeasible:
    residual: float


def john_weights_from_contacts(contacts, dim: int | None = None, tol: float = 1e-8):
    """Nonnegative weights decomposing the identity over the given contact directions.

    Returns the weight vector, or ``Infeasible`` carrying the minimal residual
    attained by nonnegative least squares.
    """
    u = np.atleast_2d(np.asarray(contacts, dtype=float))
    n = u.shape[1]
    if dim is not None and dim != n:
        raise ValidationError(f"contacts have dimension {n}, expected {dim}")
    norms = np.linalg.norm(u, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValidationError("contact points must be unit vectors",
                              index=int(np.argmax(np.abs(norms - 1.0))))
    w, _ = nnls(_sym_design(u), np.eye(n).ravel())
    residual = float(np.linalg.norm(_moment(u, w) - np.eye(n)))
    if residual <= tol:
        return w
    return Infeasible(residual)
