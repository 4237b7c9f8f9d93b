"""
Comparison procedures: the Tracy-Widom pseudorank test and Muirhead's
likelihood ratio test for equality of the trailing eigenvalues.

Both rely on asymptotic laws, unlike the exact CSV and integrated tests.
"""

import numpy as np
from scipy import stats

from .errors import DegenerateError, ParameterError
from .exact import TestOutcome, _check_step
from .tracy_widom import default_table

__all__ = ["tw_centering", "tw_scaling", "tw1_quantile", "pseudorank_test", "muirhead_test",
           "chi2_sf"]


def tw_centering(N, p):
    """``(sqrt(N - 1/2) + sqrt(p - 1/2))^2``."""
    return (np.sqrt(N - 0.5) + np.sqrt(p - 0.5)) ** 2


def tw_scaling(N, p):
    a, b = np.sqrt(N - 0.5), np.sqrt(p - 0.5)
    return (a + b) * (1.0 / a + 1.0 / b) ** (1.0 / 3.0)


def tw1_quantile(alpha, table=None):
    """Upper ``alpha`` quantile of the order-1 Tracy-Widom law.

    >>> round(tw1_quantile(0.05), 4)
    0.9793
    """
    table = table or default_table()
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return table.quantile(1.0 - alpha)


def pseudorank_test(spectrum, k, sigma2, alpha=0.05, table=None, index="residual"):
    """Kritchman-Nadler style test of ``rank(B) < k``.

    The statistic is ``(d_k^2 / sigma2 - mu) / s`` where ``mu`` and ``s`` are
    the Tracy-Widom centering and scaling for an ``N x q`` noise matrix.  With
    ``index="residual"`` (default) ``q = p - k + 1``, the size left after
    removing ``k - 1`` components, so step 1 is calibrated against the full
    noise matrix.  ``index="shifted"`` uses ``q = p - k``, which rejects about
    8.4% of the time at level 0.05 for N=50, p=10.

    The p-value is ``1 - F_1(statistic)`` from the shipped table; statistics
    beyond the table are clamped to its end points and flagged.
    """
    _check_step(spectrum, k)
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    table = table or default_table()
    N, p = spectrum.N, spectrum.p
    if index not in ("residual", "shifted"):
        raise ParameterError(f"index must be 'residual' or 'shifted', got {index!r}")
    q = p - k + 1 if index == "residual" else p - k
    stat = (spectrum.values[k - 1] ** 2 / sigma2 - tw_centering(N, q)) / tw_scaling(N, q)
    cdf, clamped = table.cdf(stat)
    threshold = tw1_quantile(alpha, table)
    return TestOutcome(
        k, "pseudorank", 1.0 - cdf, float(stat), sigma2,
        {"threshold": threshold, "reject": bool(stat > threshold), "clamped": clamped,
         "alpha": alpha, "dimension": q},
    )


def chi2_sf(x, df):
    """Chi-square survival function."""
    return float(stats.chi2.sf(x, df))


def muirhead_test(spectrum, N, k, alpha=0.05):
    """Likelihood ratio test that the trailing ``q = p - k + 1`` eigenvalues are equal.

    Uses the Bartlett-corrected statistic with the correction terms for the
    ``k - 1`` retained roots and a chi-square reference with
    ``(q + 2)(q - 1) / 2`` degrees of freedom.  No noise level is needed.
    """
    _check_step(spectrum, k)
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    d2 = spectrum.values**2
    p = d2.size
    q = p - k + 1
    tail = d2[k - 1:]
    lbar = tail.mean()
    if lbar <= 0:
        raise DegenerateError("trailing singular values are all zero")
    with np.errstate(divide="ignore"):
        log_v = (q - 1) * np.log(N - 1) + np.log(tail).sum() - q * np.log(lbar)
    lead = d2[: k - 1]
    gaps = lead - lbar
    if np.any(gaps == 0):
        raise DegenerateError("a leading eigenvalue equals the mean of the trailing ones")
    factor = N - k - (2 * q**2 + q + 2) / (6 * q) + np.sum(lbar**2 / gaps**2)
    stat = float(-factor * log_v)
    df = (q + 2) * (q - 1) // 2
    pval = 1.0 if log_v == 0 else chi2_sf(stat, df)
    critical = float(stats.chi2.isf(alpha, df))
    return TestOutcome(
        k, "muirhead", pval, stat, None,
        {"df": df, "log_v": float(log_v), "critical": critical, "reject": bool(stat > critical),
         "alpha": alpha},
    )
