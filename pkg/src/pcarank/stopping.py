"""
Rank selection from sequential step p-values.

SimpleStop takes the last step rejected at level ``alpha``; StrongStop
aggregates the tail of the p-value sequence and controls the probability of
overestimating the rank when the step p-values are independent.  Neither rule
corrects for dependence between steps.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .exact import sequential_tests
from .spectra import SingularSpectrum, svd_full

__all__ = ["RankDecision", "simple_stop", "strong_stop", "strong_stop_statistics",
           "estimate_rank", "decide", "RULES", "DEPENDENCE_CAVEAT"]

RULES = ("simple", "strong")

DEPENDENCE_CAVEAT = ("step p-values are not known to be independent; the stopping rule "
                     "is applied without correction")


def _check(pvalues, alpha):
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ParameterError("pvalues must be a non-empty vector")
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise ParameterError("pvalues must lie in [0, 1]")
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return p


def simple_stop(pvalues, alpha=0.05):
    """Largest ``k`` with ``p_k <= alpha``, or 0.

    >>> simple_stop([0.001, 0.8, 0.01, 0.9], 0.05)
    3
    """
    p = _check(pvalues, alpha)
    hits = np.flatnonzero(p <= alpha)
    return int(hits[-1] + 1) if hits.size else 0


def _log_tails(p):
    j = np.arange(1, p.size + 1)
    with np.errstate(divide="ignore"):
        terms = np.log(p) / j
    return np.cumsum(terms[::-1])[::-1]


def strong_stop_statistics(pvalues):
    """``exp(sum_{j >= k} log(p_j) / j)`` for each ``k``; zeros give 0."""
    return np.exp(_log_tails(np.asarray(pvalues, dtype=float)))


def strong_stop(pvalues, alpha=0.05, return_thresholds=False):
    """Largest ``k`` with ``exp(sum_{j=k}^{m} log(p_j) / j) <= alpha * k / m``.

    ``m`` is the number of p-values (``p - 1`` for a p-column matrix).

    >>> strong_stop([0.001, 0.8, 0.9, 0.95], 0.05)
    1
    """
    p = _check(pvalues, alpha)
    m = p.size
    thresholds = alpha * np.arange(1, m + 1) / m
    # compared on the log scale so that a statistic equal to its threshold
    # is not lost to exp/log round-off
    hits = np.flatnonzero(_log_tails(p) <= np.log(thresholds))
    kappa = int(hits[-1] + 1) if hits.size else 0
    return (kappa, thresholds) if return_thresholds else kappa


@dataclass
class RankDecision:
    kappa_hat: int
    rule: str
    alpha: float
    pvalues: np.ndarray
    per_step_thresholds: np.ndarray = None
    method: str = None
    sigma2: float = None
    outcomes: list = field(default_factory=list, repr=False)
    caveat: str = DEPENDENCE_CAVEAT

    def to_dict(self):
        return {
            "kappa_hat": self.kappa_hat, "rule": self.rule, "alpha": self.alpha,
            "method": self.method, "sigma2": self.sigma2,
            "pvalues": [float(v) for v in self.pvalues],
            "per_step_thresholds": (None if self.per_step_thresholds is None
                                    else [float(v) for v in self.per_step_thresholds]),
            "caveat": self.caveat,
        }


def decide(pvalues, rule="strong", alpha=0.05):
    """Apply ``rule`` to ``pvalues`` and wrap the result in a RankDecision."""
    if rule not in RULES:
        raise ParameterError(f"unknown rule {rule!r}; choose from {RULES}")
    p = _check(pvalues, alpha)
    if rule == "simple":
        return RankDecision(simple_stop(p, alpha), rule, alpha, p)
    kappa, thr = strong_stop(p, alpha, return_thresholds=True)
    return RankDecision(kappa, rule, alpha, p, thr)


def estimate_rank(Y, method="csv", rule="strong", alpha=0.05, noise=None, cfg=None,
                  icsv_config=None):
    """Estimate ``rank(B)`` from a data matrix.

    Parameters
    ----------
    Y : array_like or ObservedMatrix or SingularSpectrum
    method : {"csv", "icsv", "pseudorank", "muirhead"}
    rule : {"simple", "strong"}
    noise : float or NoiseEstimate, optional
        Noise variance; required unless ``method="muirhead"``.

    Returns
    -------
    RankDecision
    """
    sigma2 = getattr(noise, "sigma2", noise)
    spectrum = Y if isinstance(Y, SingularSpectrum) else svd_full(Y)
    outcomes = sequential_tests(spectrum, sigma2, method, cfg, icsv_config, alpha)
    result = decide([o.p_value for o in outcomes], rule, alpha)
    result.method = method
    result.sigma2 = None if sigma2 is None else float(sigma2)
    result.outcomes = outcomes
    return result
