import numpy as np
import pytest

from pcarank import (DegenerateError, InputError, MaskedMatrix, NoiseEstimate, ParameterError,
                     cv_select_lambda, estimate_noise, mp_median, sigma_hat, sigma_med,
                     sigma_simple, soft_impute, soft_threshold_svd, svd_full)
from pcarank.noise import cv_partition, lambda_grid
from pcarank.simlab import Design, generate_signal, replicate_rng


def noise(seed, N=50, p=10):
    return np.random.default_rng(seed).standard_normal((N, p))


def rank_one(seed, m=2.0):
    design = Design.make(50, 10, rank=1, m=m)
    rng = replicate_rng(seed, 0)
    B = generate_signal(design.signal, rng)
    return B, B + rng.standard_normal(B.shape)


def test_soft_threshold_examples(rng):
    Y = rng.standard_normal((8, 4))
    B, df = soft_threshold_svd(Y, 0.0)
    np.testing.assert_allclose(B, Y, atol=1e-12)
    assert df == 4
    B, df = soft_threshold_svd(Y, np.linalg.norm(Y, 2))
    assert df == 0 and np.all(B == 0)
    B, df = soft_threshold_svd(np.diag([3.0, 1.0]), 2.0)
    np.testing.assert_allclose(B, np.diag([1.0, 0.0]), atol=1e-12)
    assert df == 1


def test_soft_impute_full_mask_is_one_prox(rng):
    Y = rng.standard_normal((20, 5))
    res = soft_impute(MaskedMatrix(Y, np.ones(Y.shape, bool)), 1.5, max_iter=1)
    np.testing.assert_allclose(res.matrix, soft_threshold_svd(Y, 1.5)[0], atol=1e-12)
    # a second pass changes nothing
    res = soft_impute(MaskedMatrix(Y, np.ones(Y.shape, bool)), 1.5)
    assert res.converged and res.iterations == 2


def test_soft_impute_recovers_rank_one():
    B, _ = rank_one(3)
    mask = np.random.default_rng(4).random(B.shape) > 0.2
    res = soft_impute(MaskedMatrix(B, mask), 0.01 * np.linalg.norm(B, 2))
    err = np.linalg.norm((res.matrix - B)[~mask]) / np.linalg.norm(B[~mask])
    assert res.converged and err < 0.10
    assert res.monotone
    h = np.array(res.objective)
    assert np.all(h[1:] <= h[:-1] * (1 + 1e-12))


def test_soft_impute_monotone_on_noisy_data():
    _, Y = rank_one(5)
    mask = np.random.default_rng(6).random(Y.shape) > 0.3
    assert soft_impute(MaskedMatrix(Y, mask), 1.0).monotone


def test_masked_matrix_checks(rng):
    with pytest.raises(InputError):
        MaskedMatrix(rng.standard_normal((5, 3)), np.ones((3, 3), bool))
    mask = np.ones((5, 3), bool)
    mask[:, 1] = False
    assert MaskedMatrix(rng.standard_normal((5, 3)), mask).degenerate


def test_partition_covers_every_entry(rng):
    labels = cv_partition((50, 10), 20, rng)
    assert labels.shape == (50, 10)
    assert set(np.unique(labels)) == set(range(20))


def test_lambda_grid():
    Y = np.diag([4.0, 1.0])
    g = lambda_grid(Y)
    assert g.size == 50 and g[0] == pytest.approx(4.0) and g[-1] == pytest.approx(4e-3)
    with pytest.raises(DegenerateError):
        lambda_grid(np.zeros((3, 2)))


def test_singleton_grid():
    assert cv_select_lambda(noise(0), grid=[0.7]) == 0.7


def test_pure_noise_selects_heavy_shrinkage():
    upper = 0
    for s in range(100):
        Y = noise(s)
        grid = lambda_grid(Y)
        lam = cv_select_lambda(Y, grid=grid, rng=np.random.default_rng(1000 + s))
        upper += lam >= np.median(grid)
    assert upper >= 80


def test_signal_survives_thresholding():
    kept = 0
    for s in range(100):
        _, Y = rank_one(s)
        lam = cv_select_lambda(Y, rng=np.random.default_rng(2000 + s))
        kept += lam < svd_full(Y).values[0]
    assert kept >= 95


def test_zero_fit_variance(rng):
    Y = rng.standard_normal((30, 6))
    est = sigma_hat(Y, 10 * np.linalg.norm(Y, 2), "lambda")
    assert est.sigma2 == pytest.approx(np.sum(Y**2) / Y.size)
    assert est.df == 0


def test_denominator_ordering(rng):
    Y = rng.standard_normal((30, 6)) + 3 * np.outer(rng.standard_normal(30), np.ones(6))
    d = svd_full(Y).values
    for lam in (d[:-1] + d[1:]) / 2:
        a = sigma_hat(Y, lam, "lambda")
        assert a.df > 0
        b = sigma_hat(Y, lam, "lambda_df_c", c=0.5)
        c = sigma_hat(Y, lam, "lambda_df")
        assert a.sigma2 <= b.sigma2 <= c.sigma2


def test_full_df_is_degenerate(rng):
    with pytest.raises(DegenerateError):
        sigma_hat(rng.standard_normal((10, 4)), 0.0, "lambda_df")


def test_sigma_med_exam(exam):
    assert sigma_med(exam).sigma2 == pytest.approx(131.332, abs=0.5)


def test_sigma_med_scale_equivariant(rng):
    Y = rng.standard_normal((40, 7))
    assert sigma_med(3.5 * Y).sigma2 == pytest.approx(3.5**2 * sigma_med(Y).sigma2, rel=1e-12)


def test_sigma_med_null_mean():
    vals = [sigma_med(noise(s)).sigma2 for s in range(3000)]
    assert np.mean(vals) == pytest.approx(1.0, abs=0.01)
    assert np.std(vals) == pytest.approx(0.084, abs=0.015)


def test_sigma_med_signal_inflated():
    design = Design.make(50, 10, rank=3, m=2.0)
    vals = []
    for s in range(500):
        rng = replicate_rng(s, 0)
        B = generate_signal(design.signal, rng)
        vals.append(sigma_med(B + rng.standard_normal(B.shape)).sigma2)
    assert np.mean(vals) == pytest.approx(1.242, abs=0.03)


def test_mp_median_limits():
    assert mp_median(0.0) == 1.0
    assert mp_median(1e-9) == pytest.approx(1.0, abs=1e-3)
    for r in (0.05, 0.2, 0.5, 1.0):
        m = mp_median(r)
        assert (1 - np.sqrt(r)) ** 2 <= m <= (1 + np.sqrt(r)) ** 2
    with pytest.raises(ParameterError):
        mp_median(1.5)


def test_mp_median_square_case_empirical():
    rng = np.random.default_rng(8)
    pool = []
    for _ in range(10):  # 10 x 500 draws of 200 x 200: 1e6 eigenvalues
        G = rng.standard_normal((500, 200, 200))
        pool.append(np.linalg.eigvalsh(np.matmul(G.transpose(0, 2, 1), G) / 200).ravel())
    assert mp_median(1.0) == pytest.approx(np.median(np.concatenate(pool)), rel=0.01)


def test_sigma_simple_examples(rng):
    Y = rng.standard_normal((12, 4))
    assert sigma_simple(svd_full(Y), 0).sigma2 == pytest.approx(np.sum(Y**2) / Y.size)
    s = svd_full(Y)
    assert sigma_simple(s, 3).sigma2 == pytest.approx(s.values[-1] ** 2 / 12)
    from pcarank import SingularSpectrum
    assert sigma_simple(SingularSpectrum.from_values([2, 1, 1], 3), 1).sigma2 == pytest.approx(1 / 3)


def test_noise_estimate_validation():
    with pytest.raises(DegenerateError):
        NoiseEstimate(0.0, "median")
    with pytest.raises(ParameterError):
        NoiseEstimate(1.0, "mad")
    with pytest.raises(ParameterError):
        estimate_noise(noise(1), "simple")


def test_estimate_noise_records_cv(exam):
    est = estimate_noise(exam, "lambda_df_c", rng=np.random.default_rng(0), folds=5)
    assert est.cv_folds == 5 and est.c == pytest.approx(2 / 3) and est.lambda_used > 0
