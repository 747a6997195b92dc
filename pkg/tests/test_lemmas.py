import math

import numpy as np
import pytest

from isostab.lemmas import (GEOMETRIC, METRIC, LemmaResult, check_abs_scalar_prod, check_close_simplex,
                            check_close_to_cross, check_cone, check_ell_difference, check_simplex_angle,
                            check_volume_bound, lemma_property_suite, volumebound_constant)
from isostab.sampling import block_generator


@pytest.fixture(scope="module")
def suite():
    return lemma_property_suite(seed=3, trials=200, ell_samples=5000, metric_trials=10)


def test_suite_report_shape(suite):
    assert set(suite["lemmas"]) == set(GEOMETRIC) | set(METRIC)
    assert suite["ok"], {k: v for k, v in suite["lemmas"].items() if not v["ok"]}
    for name in GEOMETRIC:
        r = suite["lemmas"][name]
        assert r["trials"] == 200 and r["violations"] == 0 and r["worst_margin"] >= -1e-9
    for name in METRIC:
        r = suite["lemmas"][name]
        assert r["trials"] + r["sampler_failures"] == 30


def test_suite_is_deterministic(suite):
    again = lemma_property_suite(seed=3, trials=200, ell_samples=5000, metric_trials=10)
    assert again == suite


def test_only_selects_checks():
    rep = lemma_property_suite(seed=0, trials=100, metric_trials=0, only=("cone_gaussian_lower",))
    assert list(rep["lemmas"]) == ["cone_gaussian_lower"]


def test_minimum_trials():
    with pytest.raises(ValueError):
        lemma_property_suite(trials=10)


def test_violation_is_counted():
    r = LemmaResult("x")
    r.add(0.1)
    r.add(-0.5, {"case": 1})
    assert r.violations == 1 and not r.ok and r.worst_case == {"case": 1}
    assert r.to_dict()["worst_margin"] == -0.5


def test_empty_result_serializes():
    assert LemmaResult("x").to_dict()["worst_margin"] is None


@pytest.mark.parametrize("check,args", [
    (check_abs_scalar_prod, ()), (check_simplex_angle, (3,)), (check_close_to_cross, (2,)),
    (check_close_simplex, (3,)), (check_cone, ()), (check_volume_bound, (2,)),
])
def test_each_check_records_a_trial(check, args):
    r = LemmaResult("x")
    g = block_generator(1, "lemma-test", 0)
    for _ in range(50):
        check(r, g, *args)
    assert r.trials + r.sampler_failures == 50
    assert r.trials >= 40 and r.ok


def test_ell_difference_check_runs():
    r = LemmaResult("x")
    check_ell_difference(r, block_generator(0, "ed", 0), 2, 5000, 0, 0)
    assert r.trials == 1 and r.ok


def test_volume_bound_constant_growth():
    assert volumebound_constant(2) == 2 ** 6 * 2 ** 5
    assert volumebound_constant(3) == 2 ** 7 * 3 ** 6


def test_simplex_angle_hand_case():
    # x = (1/2, 1/2): norm 1/sqrt(2); smallest angle to the axes is pi/4
    x = np.array([0.5, 0.5])
    n = 2
    eps = 0.5
    assert np.linalg.norm(x) <= 1 - 4.0 ** (1 - n) * eps
    assert math.isclose(float(np.min(np.arccos(x / np.linalg.norm(x)))), math.pi / 4)
