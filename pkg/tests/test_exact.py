import numpy as np
import pytest
from scipy import stats

from pcarank import (NumericalError, ParameterError, SingularSpectrum, UnsupportedError,
                     confidence_interval, csv_statistic, csv_test, global_null_statistic,
                     sequential_kac_rice, sequential_pvalues, signal_parameter, svd_full)

from oracles import csv_oracle


def spectrum(d, N):
    return SingularSpectrum.from_values(d, N)


def test_matches_trapezoid_on_spot_spectrum():
    s = spectrum([6.0, 4.0, 2.0], 5)
    for k in (1, 2):
        assert csv_statistic(s, k, 0.0, 1.0) == pytest.approx(csv_oracle([6, 4, 2], k, 1.0, 5),
                                                              rel=1e-5)


def test_matches_trapezoid_with_shift():
    s = spectrum([9.0, 5.0, 3.0, 1.0], 8)
    for k, delta in [(1, 4.0), (2, -1.5), (3, 2.0)]:
        assert csv_statistic(s, k, delta, 2.0) == pytest.approx(
            csv_oracle(s.values, k, 2.0, 8, delta=delta), rel=1e-5)


def test_tie_below_gives_one():
    out = csv_test(spectrum([5.0, 3.0, 3.0, 1.0], 6), 2, 1.0)
    assert out.p_value == 1.0 and out.diagnostics["degenerate"]


def test_tie_above_gives_zero():
    out = csv_test(spectrum([5.0, 5.0, 3.0, 1.0], 6), 2, 1.0)
    assert out.p_value == 0.0 and out.diagnostics["degenerate"]


def test_step_p_is_unsupported():
    with pytest.raises(UnsupportedError):
        csv_test(spectrum([3, 2, 1], 5), 3, 1.0)
    with pytest.raises(ParameterError):
        csv_test(spectrum([3, 2, 1], 5), 0, 1.0)
    with pytest.raises(ParameterError):
        csv_test(spectrum([3, 2, 1], 5), 1, -1.0)


def test_large_dimensions_stay_finite():
    # integrands of size z^{N-p} exp(-z^2/2) with z ~ 1e3 overflow in linear space
    Y = np.random.default_rng(3).standard_normal((2000, 30)) * 20
    p = sequential_pvalues(svd_full(Y), 400.0)
    assert np.all((p >= 0) & (p <= 1))


def test_exam_table_values(exam):
    s = svd_full(exam)
    np.testing.assert_allclose(sequential_pvalues(s, 131.332), [0.000, 0.015, 0.573, 0.940],
                               atol=0.01)
    np.testing.assert_allclose(sequential_pvalues(s, 75.957), [0.000, 0.000, 0.001, 0.093],
                               atol=0.01)


def test_zero_matrix_is_flagged():
    from pcarank.exact import sequential_tests
    outs = sequential_tests(svd_full(np.zeros((6, 4))), 1.0)
    assert all(o.diagnostics["degenerate"] for o in outs)


def test_null_uniform_first_step():
    ps = [csv_statistic(svd_full(np.random.default_rng(s).standard_normal((50, 10))), 1, 0.0, 1.0)
          for s in range(2000)]
    assert stats.kstest(ps, "uniform").pvalue > 0.01


def test_global_null_is_first_step():
    d = [7.0, 4.0, 2.5, 0.3]
    assert global_null_statistic(d, 9, 1.0) == csv_statistic(spectrum(d, 9), 1, 0.0, 1.0)


def test_sequential_kac_rice_reduces_dimension():
    s = spectrum([7.0, 4.0, 2.5, 0.3], 9)
    kr = sequential_kac_rice(s, 1.0)
    assert kr[1] == pytest.approx(global_null_statistic([4.0, 2.5, 0.3], 8, 1.0))


def test_monotone_in_delta():
    s = spectrum([8.0, 5.0, 3.0, 2.0, 0.5], 12)
    for k in (1, 2, 3):
        vals = [csv_statistic(s, k, t, 1.0) for t in np.linspace(-6, 14, 21)]
        assert np.all(np.diff(vals) > 0)


def test_scale_invariance():
    s = spectrum([8.0, 5.0, 3.0, 2.0], 12)
    s3 = spectrum(3 * s.values, 12)
    for k in (1, 2, 3):
        assert csv_statistic(s3, k, 0.0, 9.0) == pytest.approx(csv_statistic(s, k, 0.0, 1.0),
                                                               rel=1e-8)


@pytest.fixture(scope="module")
def seeded_instance():
    rng = np.random.default_rng(11)
    B = np.zeros((50, 10))
    B[0, 0] = 9.0
    return svd_full(B + rng.standard_normal((50, 10)))


def test_interval_endpoint_equations(seeded_instance):
    ci = confidence_interval(seeded_instance, 1, 1.0, 0.95)
    assert abs(ci.diagnostics["residual_lower"]) <= 1e-4
    assert abs(ci.diagnostics["residual_upper"]) <= 1e-4
    assert csv_statistic(seeded_instance, 1, ci.lower, 1.0) == pytest.approx(0.025, abs=1e-4)
    assert csv_statistic(seeded_instance, 1, ci.upper, 1.0) == pytest.approx(0.975, abs=1e-4)


def test_interval_widens_with_level(seeded_instance):
    widths = []
    for level in (0.5, 0.9, 0.95, 0.99):
        ci = confidence_interval(seeded_instance, 2, 1.0, level)
        widths.append((ci.lower, ci.upper))
    for (a, b), (c, d) in zip(widths, widths[1:]):
        assert c < a and b < d


def test_interval_on_degenerate_step():
    with pytest.raises(NumericalError):
        confidence_interval(spectrum([5.0, 3.0, 3.0], 6), 2, 1.0)


def test_signal_parameter_is_inner_product(seeded_instance):
    B = np.zeros((50, 10))
    B[0, 0] = 9.0
    u, v = seeded_instance.left[:, 0], seeded_instance.right[:, 0]
    assert signal_parameter(seeded_instance, B, 1) == pytest.approx(9.0 * u[0] * v[0])
