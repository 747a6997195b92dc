import numpy as np
from hypothesis import given, strategies as st

from isostab.sampling import (BLOCK_SIZE, GaussianEstimate, gaussian_block, mc_estimate, mc_estimates,
                              reduce_blocks, mc_blocks, sphere_block, stream_key)


def test_blocks_regenerate_in_isolation():
    a = gaussian_block(3, 5, "s", 4, 100)
    b = gaussian_block(3, 5, "s", 4, 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, gaussian_block(3, 5, "s", 3, 100))
    assert not np.array_equal(a, gaussian_block(3, 5, "t", 4, 100))
    assert not np.array_equal(a, gaussian_block(3, 6, "s", 4, 100))


def test_stream_key_stable():
    assert np.array_equal(stream_key(1, "x"), stream_key(1, "x"))
    assert not np.array_equal(stream_key(1, "x"), stream_key(1, "y"))


def test_sphere_block_unit():
    u = sphere_block(4, 0, "s", 0, 1000)
    assert np.allclose(np.linalg.norm(u, axis=1), 1.0)


@given(workers=st.integers(1, 6), samples=st.integers(1000, 4 * BLOCK_SIZE + 17))
def test_estimate_independent_of_workers(workers, samples):
    f = lambda x: np.abs(x).max(axis=1)
    a = mc_estimate(f, 3, samples, 2, "w", workers=1)
    b = mc_estimate(f, 3, samples, 2, "w", workers=workers)
    assert a == b


def test_merged_statistics_match_direct():
    samples = 3 * BLOCK_SIZE + 101
    f = lambda x: x[:, 0] ** 2
    est = mc_estimate(f, 2, samples, 0, "m")
    xs = np.vstack([gaussian_block(2, 0, "m", j, s) for j, s in
                    enumerate([BLOCK_SIZE] * 3 + [101])])
    v = xs[:, 0] ** 2
    assert np.isclose(est.value, v.mean(), rtol=1e-12)
    assert np.isclose(est.std_error, v.std(ddof=1) / np.sqrt(samples), rtol=1e-9)
    assert est.samples == samples


def test_multi_column_labels():
    est = mc_estimates(lambda x: np.column_stack([x[:, 0], 2 * x[:, 0]]), 2, 5000, 0, "lab",
                       labels=["a", "b"])
    assert [e.stream for e in est] == ["lab#a", "lab#b"]
    assert np.isclose(est[1].value, 2 * est[0].value)
    stats = mc_blocks(lambda x: x[:, :1], 2, 5000, 0, "lab")
    assert reduce_blocks(stats)[0] == 5000


def test_estimate_json_round_trip():
    e = GaussianEstimate(1.5, 0.1, 1000, 3, "x")
    assert GaussianEstimate.from_dict(e.to_dict()) == e
    assert set(e.to_dict()) == {"value", "std_error", "samples", "seed", "stream"}
