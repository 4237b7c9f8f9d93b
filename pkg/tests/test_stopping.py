import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcarank import ParameterError, estimate_rank, simple_stop, strong_stop
from pcarank.noise import sigma_med
from pcarank.stopping import DEPENDENCE_CAVEAT, decide, strong_stop_statistics


def strong_stop_loop(p, alpha):
    m = len(p)
    best = 0
    for k in range(1, m + 1):
        if any(v == 0 for v in p[k - 1:]):
            log_stat = -math.inf
        else:
            log_stat = math.fsum(math.log(p[j - 1]) / j for j in range(k, m + 1))
        if log_stat <= math.log(alpha * k / m) + 1e-12:
            best = k
    return best


def test_simple_examples():
    assert simple_stop([0.001, 0.8, 0.01, 0.9], 0.05) == 3
    assert simple_stop([0.2, 0.3, 0.9], 0.05) == 0
    assert simple_stop([0.0] * 4, 0.05) == 4


def test_strong_examples():
    p = [0.001, 0.8, 0.9, 0.95]
    assert strong_stop(p, 0.05) == 1
    stats = strong_stop_statistics(p)
    assert stats[0] == pytest.approx(math.exp(-7.0673), rel=1e-4)
    assert stats[1] == pytest.approx(0.8526, abs=1e-4)
    assert strong_stop([0.0] * 5, 0.05) == 5
    assert strong_stop([1.0] * 5, 0.05) == 0


def test_boundary_is_inclusive():
    # a single p-value exactly at the threshold alpha * 1 / 1
    assert strong_stop([0.05], 0.05) == 1
    assert simple_stop([0.05], 0.05) == 1


def test_validation():
    with pytest.raises(ParameterError):
        strong_stop([], 0.05)
    with pytest.raises(ParameterError):
        simple_stop([0.5, 1.2], 0.05)
    with pytest.raises(ParameterError):
        decide([0.5], "greedy")


pvals = st.lists(st.one_of(st.just(0.0), st.just(1.0), st.floats(0, 1)), min_size=1, max_size=12)


@given(pvals, st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_strong_monotone_in_alpha(p, a1, a2):
    lo, hi = sorted((a1, a2))
    assert strong_stop(p, lo) <= strong_stop(p, hi)


@given(pvals, st.floats(0.001, 0.5))
def test_strong_matches_loop(p, alpha):
    assert strong_stop(p, alpha) == strong_stop_loop(p, alpha)


@given(st.integers(1, 12), st.floats(0.001, 0.999))
def test_extreme_inputs(m, alpha):
    for rule in (simple_stop, strong_stop):
        assert rule([1.0] * m, alpha) == 0
        assert rule([0.0] * m, alpha) == m


def test_decision_record():
    r = decide([0.001, 0.8, 0.9, 0.95], "strong", 0.05)
    assert r.kappa_hat == 1
    np.testing.assert_allclose(r.per_step_thresholds, [0.0125, 0.025, 0.0375, 0.05])
    assert r.to_dict()["caveat"] == DEPENDENCE_CAVEAT


def test_exam_ranks(exam):
    assert estimate_rank(exam, noise=131.332).kappa_hat == 1
    assert estimate_rank(exam, noise=75.957).kappa_hat == 2
    assert estimate_rank(exam, noise=sigma_med(exam)).kappa_hat == 1


def test_muirhead_needs_no_sigma(exam):
    r = estimate_rank(exam, method="muirhead")
    assert r.sigma2 is None and len(r.outcomes) == 4
    with pytest.raises(ParameterError):
        estimate_rank(exam, method="csv")


def test_null_overestimation():
    over = [estimate_rank(np.random.default_rng(s).standard_normal((50, 10)), noise=1.0).kappa_hat > 0
            for s in range(3000)]
    assert np.mean(over) <= 0.05 + 0.02
