"""Deterministic Gaussian sampling and Monte-Carlo reduction.

Samples are produced in fixed-size blocks.  Block ``j`` of stream ``s`` is
drawn from a Philox generator whose key is derived from ``(seed, s)`` and
whose counter starts at ``j << 64``, so any block can be regenerated in
isolation.  Per-block statistics are merged in block order, which makes every
estimate bit-identical regardless of how many workers computed the blocks.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

BLOCK_SIZE = 1 << 15


@dataclass(frozen=True)
class GaussianEstimate:
    value: float
    std_error: float
    samples: int
    seed: int
    stream: str

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "GaussianEstimate":
        return cls(float(doc["value"]), float(doc["std_error"]), int(doc["samples"]),
                   int(doc["seed"]), str(doc["stream"]))


def stream_key(seed: int, stream: str) -> np.ndarray:
    digest = hashlib.blake2b(stream.encode("utf-8"), digest_size=8).digest()
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest, "little")])
    return ss.generate_state(2, dtype=np.uint64)


def block_generator(seed: int, stream: str, block: int) -> np.random.Generator:
    counter = np.array([0, block, 0, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=stream_key(seed, stream), counter=counter))


def _block_sizes(samples: int) -> list[int]:
    full, rest = divmod(samples, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def gaussian_block(n: int, seed: int, stream: str, block: int, size: int) -> np.ndarray:
    return block_generator(seed, stream, block).standard_normal((size, n))


def sphere_block(n: int, seed: int, stream: str, block: int, size: int) -> np.ndarray:
    x = gaussian_block(n, seed, stream, block, size)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _merge(stats: list[tuple[int, float, float]]) -> tuple[int, float, float]:
    # Chan et al. pairwise update, applied in block order.
    count, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        if nb == 0:
            continue
        total = count + nb
        delta = mb - mean
        mean = mean + delta * nb / total
        m2 = m2 + m2b + delta * delta * count * nb / total
        count = total
    return count, mean, m2


def mc_blocks(fn: Callable[[np.ndarray], np.ndarray], n: int, samples: int, seed: int,
              stream: str, *, sphere: bool = False, workers: int = 1) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Evaluate ``fn`` on every sample block and return per-block statistics.

    ``fn`` maps a ``(m, n)`` array of draws to an ``(m,)`` or ``(m, c)`` array.
    Each returned entry is ``(count, mean, m2)`` with vector-valued mean/m2
    when ``fn`` returns several columns.
    """
    draw = sphere_block if sphere else gaussian_block
    sizes = _block_sizes(samples)

    def one(j: int):
        vals = np.asarray(fn(draw(n, seed, stream, j, sizes[j])), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        mean = vals.mean(axis=0)
        m2 = ((vals - mean) ** 2).sum(axis=0)
        return sizes[j], mean, m2

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(len(sizes))))
    return [one(j) for j in range(len(sizes))]


def reduce_blocks(stats, column: int = 0) -> tuple[int, float, float]:
    """Merge block statistics of one column into ``(count, mean, std_error)``."""
    count, mean, m2 = _merge([(c, float(m[column]), float(q[column])) for c, m, q in stats])
    var = m2 / (count - 1) if count > 1 else 0.0
    return count, mean, float(np.sqrt(max(var, 0.0) / count))


def mc_estimate(fn, n: int, samples: int, seed: int, stream: str, *, sphere: bool = False,
                workers: int = 1) -> GaussianEstimate:
    stats = mc_blocks(fn, n, samples, seed, stream, sphere=sphere, workers=workers)
    count, mean, se = reduce_blocks(stats)
    return GaussianEstimate(mean, se, count, int(seed), stream)


def mc_estimates(fn, n: int, samples: int, seed: int, stream: str, *, sphere: bool = False,
                 workers: int = 1, labels: list[str] | None = None) -> list[GaussianEstimate]:
    """Several estimates sharing one set of draws (common random numbers)."""
    stats = mc_blocks(fn, n, samples, seed, stream, sphere=sphere, workers=workers)
    ncol = len(stats[0][1])
    out = []
    for c in range(ncol):
        count, mean, se = reduce_blocks(stats, c)
        name = stream if labels is None else f"{stream}#{labels[c]}"
        out.append(GaussianEstimate(mean, se, count, int(seed), name))
    return out


def default_samples(n: int) -> int:
    return 1_000_000 if n <= 4 else 4_000_000
