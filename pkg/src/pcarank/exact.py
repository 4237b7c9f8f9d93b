"""
Conditional singular value (CSV) tests and confidence intervals.

For step ``k`` the statistic is the conditional survival probability of the
k-th singular value given all the others,

    S_{k,delta} = int_{d_k}^{d_{k-1}} f / int_{d_{k+1}}^{d_{k-1}} f,
    f(z) = exp(-(z-delta)^2 / 2 sigma^2) z^(N-p) prod_{j != k} |z^2 - d_j^2|,

with ``d_0 = inf``.  With ``delta = 0`` it is an exact p-value for
``rank(B) < k``; inverting it in ``delta`` gives an exact interval for
``<U_k V_k^T, B>``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import NumericalError, ParameterError, UnsupportedError
from .spectra import (
    DEFAULT_QUADRATURE,
    SingularSpectrum,
    _gauss_legendre,
    _logsumexp,
    _truncate_upper,
    csv_log_kernel,
    integrate_log,
)

__all__ = [
    "METHODS",
    "TestOutcome",
    "ConfidenceInterval",
    "csv_statistic",
    "csv_test",
    "global_null_statistic",
    "sequential_kac_rice",
    "sequential_tests",
    "sequential_pvalues",
    "confidence_interval",
    "signal_parameter",
]

METHODS = ("csv", "icsv", "pseudorank", "muirhead")

TIE_RTOL = 1e-12


@dataclass
class TestOutcome:
    """Result of one step test.

    ``diagnostics`` holds method-specific extras such as the quadrature
    tolerance, Monte Carlo standard error or effective sample size, and a
    ``degenerate`` flag when the statistic was fixed by a tie.
    """

    k: int
    method: str
    p_value: float
    statistic: float
    sigma2_used: float = None
    diagnostics: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        return {
            "k": self.k,
            "method": self.method,
            "p_value": self.p_value,
            "statistic": self.statistic,
            "sigma2_used": self.sigma2_used,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass
class ConfidenceInterval:
    k: int
    level: float
    lower: float
    upper: float
    target: str = "<U_k V_k^T, B>"
    diagnostics: dict = field(default_factory=dict)

    def __contains__(self, value):
        return self.lower < value < self.upper

    def to_dict(self):
        return {
            "k": self.k,
            "level": self.level,
            "lower": self.lower,
            "upper": self.upper,
            "target": self.target,
            "diagnostics": dict(self.diagnostics),
        }


def _tied(a, b):
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b))


def _check_step(spectrum, k):
    p = spectrum.p
    if k == p:
        raise UnsupportedError("the step k = p is not testable (rank p is unidentifiable)")
    if not 1 <= k < p:
        raise ParameterError(f"k must lie in 1..{p - 1}, got {k}")


def _limits(d, k):
    """(lower, split, upper) integration limits for step k (1-based)."""
    upper = np.inf if k == 1 else d[k - 2]
    return d[k], d[k - 1], upper


def _degenerate_value(d, k):
    lower, split, upper = _limits(d, k)
    if _tied(split, lower):
        return 1.0
    if np.isfinite(upper) and _tied(split, upper):
        return 0.0
    return None


def _log_pieces(d, k, delta, sigma2, N, cfg):
    """Log integrals below and above d_k of the step-k kernel."""
    lower, split, upper = _limits(d, k)
    logf = csv_log_kernel(d, k, delta, sigma2, N, d.size)
    below = integrate_log(logf, lower, split, cfg)
    above = integrate_log(logf, split, upper, cfg)
    return below, above


def csv_test(spectrum, k, sigma2, delta=0.0, cfg=None):
    """CSV test at step ``k`` returning a :class:`TestOutcome`."""
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    _check_step(spectrum, k)
    cfg = cfg or DEFAULT_QUADRATURE
    d = spectrum.values
    fixed = _degenerate_value(d, k)
    if fixed is not None:
        return TestOutcome(k, "csv", fixed, fixed, sigma2, {"degenerate": True, "delta": delta})
    below, above = _log_pieces(d, k, delta, sigma2, spectrum.N, cfg)
    total = np.logaddexp(below, above)
    if not np.isfinite(total):
        raise NumericalError(f"normalising integral vanished at step {k}")
    value = float(np.exp(above - total))
    return TestOutcome(
        k, "csv", value, value, sigma2,
        {"degenerate": False, "delta": delta, "quadrature_rel_tol": cfg.rel_tol,
         "log_numerator": float(above), "log_denominator": float(total)},
    )


def csv_statistic(spectrum, k, delta, sigma2, cfg=None):
    """The value of ``S_{k,delta}`` in [0, 1]."""
    return csv_test(spectrum, k, sigma2, delta=delta, cfg=cfg).p_value


def global_null_statistic(values, N, sigma2, cfg=None):
    """Kac-Rice global null p-value for the leading singular value.

    Conditions on ``d_2, ..., d_p`` and integrates ``d_1`` over
    ``(d_2, inf)``; identical to the CSV statistic at ``k = 1``.
    """
    d = np.sort(np.asarray(values, dtype=float))[::-1]
    if d.size < 2:
        raise ParameterError("need at least two singular values")
    return csv_statistic(SingularSpectrum(d, int(N)), 1, 0.0, sigma2, cfg)


def sequential_kac_rice(spectrum, sigma2, cfg=None):
    """Naive sequential use of the global null test.

    Step ``k`` drops the ``k-1`` leading singular values and applies the
    global test to the remaining ones as if they came from an
    ``(N-k+1) x (p-k+1)`` noise matrix.  Known to be conservative past the
    first null step; kept as a negative control.
    """
    d = spectrum.values
    N, p = spectrum.N, spectrum.p
    out = []
    for k in range(1, p):
        trailing = d[k - 1:]
        fixed = _degenerate_value(trailing, 1)
        if fixed is not None:
            out.append(fixed)
            continue
        out.append(global_null_statistic(trailing, N - k + 1, sigma2, cfg))
    return np.array(out)


def sequential_tests(spectrum, sigma2=None, method="csv", cfg=None, icsv_config=None, alpha=0.05):
    """Run the step-k test of ``method`` for ``k = 1..p-1``.

    ``sigma2`` is required for every method except ``"muirhead"``.
    ``alpha`` only affects the reject flags recorded by the baselines.
    """
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}; choose from {METHODS}")
    if method != "muirhead" and (sigma2 is None or not sigma2 > 0):
        raise ParameterError(f"method {method!r} needs a positive sigma2")
    steps = range(1, spectrum.p)
    if method == "csv":
        return [csv_test(spectrum, k, sigma2, cfg=cfg) for k in steps]
    if method == "icsv":
        from .icsv import ISConfig, icsv_statistic

        icfg = icsv_config or ISConfig()
        return [icsv_statistic(spectrum, k, sigma2, icfg) for k in steps]
    from .baselines import muirhead_test, pseudorank_test

    if method == "pseudorank":
        return [pseudorank_test(spectrum, k, sigma2, alpha) for k in steps]
    return [muirhead_test(spectrum, spectrum.N, k, alpha) for k in steps]


def sequential_pvalues(spectrum, sigma2=None, method="csv", cfg=None, icsv_config=None):
    """Vector of the ``p - 1`` step p-values."""
    outcomes = sequential_tests(spectrum, sigma2, method, cfg, icsv_config)
    return np.array([o.p_value for o in outcomes])


class _TiltedLaw:
    """Fixed quadrature rule for ``S_{k,delta}`` as a function of ``delta``.

    ``delta`` only enters through the tilt ``exp(z delta / sigma^2)``, so
    the delta-free part of the log kernel is tabulated once on a composite
    Gauss-Legendre rule (panels no wider than sigma/4, geometrically graded
    towards every endpoint) and each evaluation is two log-sum-exps.
    """

    GRADING = 24
    NODES = 16

    def __init__(self, spectrum, k, sigma2, cfg):
        self.d = spectrum.values
        self.k = k
        self.sigma2 = sigma2
        self.sigma = np.sqrt(sigma2)
        self.N = spectrum.N
        self.cfg = cfg
        self.base = csv_log_kernel(self.d, k, 0.0, sigma2, self.N, self.d.size)
        self.lower, self.split, self.upper = _limits(self.d, k)
        self._cover = -np.inf
        self._above = None
        self._below = self._rule(self.lower, self.split)
        if np.isfinite(self.upper):
            self._above = self._rule(self.split, self.upper)
            self._cover = np.inf

    def _rule(self, a, b):
        width = b - a
        step = self.sigma / 4.0
        n = max(1, int(np.ceil(width / step)))
        edges = np.linspace(a, b, n + 1)
        first = min(width, step) / 2.0
        grading = first * 0.5 ** np.arange(self.GRADING)
        edges = np.unique(np.r_[edges, a + grading, b - grading])
        edges = edges[(edges >= a) & (edges <= b)]
        x, logw = _gauss_legendre(self.NODES)
        lo, hi = edges[:-1], edges[1:]
        half = 0.5 * (hi - lo)
        z = (0.5 * (lo + hi))[:, None] + half[:, None] * x[None, :]
        z = z.ravel()
        with np.errstate(divide="ignore"):
            lw = (logw[None, :] + np.log(half)[:, None]).ravel()
        return z, lw + self.base(z)

    def _ensure_cover(self, delta):
        if delta <= self._cover:
            return
        reach = max(delta, self.split) + abs(delta) * 0.5 + 10.0 * self.sigma
        logf = lambda z: self.base(z) + z * reach / self.sigma2
        top, _ = _truncate_upper(logf, self.split, self.cfg)
        self._above = self._rule(self.split, top)
        self._cover = reach

    def log_masses(self, delta):
        self._ensure_cover(delta)
        t = delta / self.sigma2
        zb, lb = self._below
        za, la = self._above
        return _logsumexp(lb + t * zb), _logsumexp(la + t * za)

    def __call__(self, delta):
        below, above = self.log_masses(delta)
        return float(np.exp(above - np.logaddexp(below, above)))


def confidence_interval(spectrum, k, sigma2, level=0.95, cfg=None, verify=True):
    """Exact interval for ``<U_k V_k^T, B>`` by inverting ``S_{k,delta}``.

    ``S_{k,delta}`` increases with ``delta``, so the interval is
    ``(delta_lo, delta_hi)`` with ``S = alpha/2`` at the lower end and
    ``S = 1 - alpha/2`` at the upper end.  Endpoints are located to
    ``1e-6 sigma``.  With ``verify`` the endpoint equations are re-evaluated
    by adaptive quadrature and the residuals stored in ``diagnostics``.
    """
    if not 0 < level < 1:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    _check_step(spectrum, k)
    cfg = cfg or DEFAULT_QUADRATURE
    d = spectrum.values
    if _degenerate_value(d, k) is not None:
        raise NumericalError(f"step {k} has a degenerate integration interval; no interval exists")
    alpha = 1.0 - level
    law = _TiltedLaw(spectrum, k, sigma2, cfg)
    sigma = law.sigma
    xtol = 1e-6 * sigma

    def solve(target):
        g = lambda t: law(t) - target
        lo, hi = d[k - 1] - 10 * sigma, d[k - 1] + 10 * sigma
        glo, ghi = g(lo), g(hi)
        span = 20 * sigma
        for _ in range(60):
            if glo < 0 < ghi:
                break
            span *= 2
            if glo >= 0:
                hi, ghi = lo, glo
                lo -= span
                glo = g(lo)
            else:
                lo, glo = hi, ghi
                hi += span
                ghi = g(hi)
        else:
            raise NumericalError(
                f"could not bracket S = {target} for step {k} in [{lo}, {hi}]",
                estimate=None, achieved=None,
            )
        return optimize.brentq(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)

    lower = solve(alpha / 2)
    upper = solve(1 - alpha / 2)
    diag = {"alpha": alpha, "xtol": xtol}
    if verify:
        diag["residual_lower"] = csv_statistic(spectrum, k, lower, sigma2, cfg) - alpha / 2
        diag["residual_upper"] = csv_statistic(spectrum, k, upper, sigma2, cfg) - (1 - alpha / 2)
    return ConfidenceInterval(k, level, float(lower), float(upper), diagnostics=diag)


def signal_parameter(spectrum, B, k):
    """``<U_k V_k^T, B>`` for the realised factors of the data."""
    if spectrum.left is None:
        raise ParameterError("spectrum carries no singular vectors")
    u = spectrum.left[:, k - 1]
    v = spectrum.right[:, k - 1]
    return float(u @ np.asarray(B) @ v)
