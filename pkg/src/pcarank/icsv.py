"""
Integrated CSV test by self-normalised importance sampling.

The integrated statistic conditions only on ``d_1, ..., d_{k-1}``.  Its
integrand over the trailing singular values ``y_k >= ... >= y_p`` factors as

    F_{N-k+1, p-k+1}(y_k, ..., y_p) * prod_{i<k} prod_{j>=k} (d_i^2 - y_j^2)
        * 1{y_k <= d_{k-1}}

where ``F_{n,q}`` is the joint density of the singular values of an n x q
Gaussian matrix.  Draws from ``F`` are therefore used as the proposal and the
cross terms as the weight; the p-value is the weighted fraction of draws with
``y_k >= d_k``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalError, ParameterError, UnsupportedError
from .exact import TestOutcome, _check_step, _tied

__all__ = ["ISConfig", "sample_wishart_singulars", "icsv_statistic", "MAX_DIMENSION"]

MAX_DIMENSION = 40


@dataclass(frozen=True)
class ISConfig:
    """Importance sampling settings.

    Draws are produced in batches of ``batch_size`` until ``sample_count`` is
    reached; if the effective sample size is still below ``min_ess`` more
    batches are added, up to ``max_batches`` in total.  Every batch has its
    own seed derived from ``seed``, so results do not depend on evaluation
    order.  Sampling also continues while the standard error of the estimate
    exceeds ``max_standard_error``.
    """

    sample_count: int = 50_000
    seed: int = 0
    min_ess: int = 50
    max_batches: int = 40
    batch_size: int = 5_000
    max_standard_error: float = 0.01

    def __post_init__(self):
        if self.sample_count < 1000:
            raise ParameterError("sample_count must be at least 1000")
        if self.min_ess < 50:
            raise ParameterError("min_ess must be at least 50")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be positive")
        if self.max_batches * self.batch_size < self.sample_count:
            raise ParameterError("max_batches * batch_size must cover sample_count")


def sample_wishart_singulars(Nr, pr, sigma2=1.0, rng=None, size=None):
    """Singular values of an ``Nr x pr`` matrix with iid N(0, sigma2) entries.

    Returns a decreasing vector of length ``pr``, or an array of shape
    ``(size, pr)`` when ``size`` is given.
    """
    if not Nr >= pr >= 1:
        raise ParameterError(f"need Nr >= pr >= 1, got Nr={Nr}, pr={pr}")
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    rng = np.random.default_rng(rng)
    count = 1 if size is None else int(size)
    G = rng.standard_normal((count, Nr, pr))
    gram = np.matmul(G.transpose(0, 2, 1), G)
    ev = np.linalg.eigvalsh(gram)[:, ::-1]
    y = np.sqrt(np.clip(ev, 0.0, None)) * np.sqrt(sigma2)
    return y[0] if size is None else y


@lru_cache(maxsize=512)
def _unit_batch(Nr, pr, batch_size, seed, index):
    ss = np.random.SeedSequence([seed, Nr, pr, index])
    rng = np.random.Generator(np.random.Philox(ss))
    y = sample_wishart_singulars(Nr, pr, 1.0, rng, size=batch_size)
    y.setflags(write=False)
    return y


def _log_weights(u, scale, sigma, lead):
    """Log importance weights for unit draws ``u`` used at ``scale * sigma``.

    Target over proposal is the Gaussian correction for the rescaled
    proposal times the cross terms, restricted to ``y_k^2 <= lead[-1]``.
    """
    y2 = (u * (scale * sigma)) ** 2
    lw = 0.5 * y2.sum(axis=1) * (1.0 / (scale * sigma) ** 2 - 1.0 / sigma**2)
    if lead.size:
        with np.errstate(divide="ignore", invalid="ignore"):
            lw = lw + np.log(lead[None, :, None] - y2[:, None, :]).sum(axis=(1, 2))
        lw = np.where(y2[:, 0] <= lead[-1], lw, -np.inf)
    return lw


def _ess(lw):
    m = lw.max()
    if not np.isfinite(m):
        return 0.0
    w = np.exp(lw - m)
    return float(w.sum() ** 2 / np.sum(w**2))


def _pick_scale(u, sigma, lead):
    """Proposal scale with the largest pilot effective sample size."""
    best, best_ess = 1.0, -1.0
    for grid in (np.arange(0.60, 1.101, 0.05), None):
        if grid is None:
            grid = best + np.arange(-0.04, 0.041, 0.01)
        for s in grid:
            if s <= 0:
                continue
            e = _ess(_log_weights(u, s, sigma, lead))
            if e > best_ess:
                best, best_ess = float(s), e
    return best


PILOT = 2**31


def icsv_statistic(spectrum, k, sigma2, cfg=None):
    """Integrated CSV p-value at step ``k``.

    The proposal is the singular value law of an ``(N-k+1) x (p-k+1)``
    Gaussian matrix whose scale is tuned on a pilot batch (the cross terms
    pull the target towards zero, so a slightly shrunken proposal matches it
    much better).  Sampling continues past ``cfg.sample_count`` while the
    effective sample size is below ``cfg.min_ess`` or the standard error
    exceeds ``cfg.max_standard_error``, up to ``cfg.max_batches`` batches.

    Returns
    -------
    TestOutcome
        ``diagnostics`` carries the Monte Carlo standard error (delta method
        on the ratio), the effective sample size, the proposal scale, the
        number of draws and a ``warning`` entry when the ESS stayed below
        ``cfg.min_ess``.
    """
    cfg = cfg or ISConfig()
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    _check_step(spectrum, k)
    d = spectrum.values
    N, p = spectrum.N, spectrum.p
    if p > MAX_DIMENSION:
        raise UnsupportedError(f"the integrated test is limited to p <= {MAX_DIMENSION}")
    Nr, pr = N - k + 1, p - k + 1
    dk = d[k - 1]
    cap = np.inf if k == 1 else d[k - 2]
    if np.isfinite(cap) and _tied(dk, cap):
        return TestOutcome(k, "icsv", 0.0, 0.0, sigma2, {"degenerate": True})
    # squares taken once from the same array: scalar and array powers can
    # differ in the last bit
    lead = d[: k - 1] ** 2
    if lead.size and np.any(np.diff(lead) > 0):
        raise NumericalError("leading singular values are not sorted; weights would be negative")
    sigma = np.sqrt(sigma2)

    scale = 1.0
    if lead.size:
        pilot = _unit_batch(Nr, pr, min(cfg.batch_size, 2000), cfg.seed, PILOT)
        scale = _pick_scale(pilot, sigma, lead)

    log_w, hits = [], []
    drawn = batch = 0
    while batch < cfg.max_batches:
        u = _unit_batch(Nr, pr, cfg.batch_size, cfg.seed, batch)
        batch += 1
        drawn += u.shape[0]
        log_w.append(_log_weights(u, scale, sigma, lead))
        hits.append(u[:, 0] * (scale * sigma) >= dk)
        if drawn >= cfg.sample_count:
            value, se, ess = _ratio(np.concatenate(log_w), np.concatenate(hits))
            if ess >= cfg.min_ess and se <= cfg.max_standard_error:
                break

    value, se, ess = _ratio(np.concatenate(log_w), np.concatenate(hits))
    if ess == 0.0:
        raise NumericalError(
            f"no importance sample fell below d_{k - 1} at step {k}; increase sample_count",
            estimate=None, achieved=0.0,
        )
    diagnostics = {
        "degenerate": False, "draws": int(drawn), "batches": int(batch), "seed": cfg.seed,
        "proposal_scale": scale, "mc_standard_error": se, "effective_sample_size": ess,
    }
    if ess < cfg.min_ess:
        diagnostics["warning"] = f"effective sample size {ess:.1f} below {cfg.min_ess}"
    return TestOutcome(k, "icsv", value, value, sigma2, diagnostics)


def _ratio(lw, hits):
    """Self-normalised estimate, its delta-method standard error and ESS."""
    m = lw.max()
    if not np.isfinite(m):
        return float("nan"), float("nan"), 0.0
    w = np.exp(lw - m)
    total = w.sum()
    value = float(np.clip(np.sum(w[hits]) / total, 0.0, 1.0))
    se = float(np.sqrt(np.sum(w**2 * (hits - value) ** 2)) / total)
    ess = float(total**2 / np.sum(w**2))
    return value, se, ess
