"""
Singular value front-end and log-domain quadrature.

The exact tests integrate functions such as

    exp(-(z - delta)^2 / (2 sigma^2)) * z^(N-p) * prod_{j != k} |z^2 - d_j^2|

whose logarithm easily spans thousands of nats, so everything here works with
natural logarithms and only exponentiates after shifting by a running maximum.
A log-magnitude is a plain float; ``-inf`` encodes zero.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import InputError, NumericalError, ParameterError

__all__ = [
    "ObservedMatrix",
    "SingularSpectrum",
    "QuadratureConfig",
    "as_observed",
    "svd_full",
    "log_csv_integrand",
    "integrate_log",
    "log_add",
    "csv_log_kernel",
]


@dataclass(frozen=True)
class ObservedMatrix:
    """An N x p data matrix with N >= p.

    Inputs with fewer rows than columns are transposed on construction and
    ``transposed`` records that this happened.
    """

    entries: np.ndarray
    transposed: bool = False

    def __post_init__(self):
        Y = np.array(self.entries, dtype=float)
        if Y.ndim != 2 or Y.size == 0:
            raise InputError(f"expected a non-empty 2-d matrix, got shape {Y.shape}")
        if not np.all(np.isfinite(Y)):
            i, j = np.argwhere(~np.isfinite(Y))[0]
            raise InputError(f"non-finite entry at row {i}, column {j}")
        flipped = self.transposed
        if Y.shape[0] < Y.shape[1]:
            Y = Y.T
            flipped = not flipped
        Y.setflags(write=False)
        object.__setattr__(self, "entries", Y)
        object.__setattr__(self, "transposed", flipped)

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape


def as_observed(Y):
    if isinstance(Y, ObservedMatrix):
        return Y
    return ObservedMatrix(Y)


@dataclass(frozen=True)
class SingularSpectrum:
    """Ordered singular values ``d_1 >= ... >= d_p`` of an N x p matrix.

    ``left`` (N x p) and ``right`` (p x p, columns are right singular
    vectors) are ``None`` when the spectrum was built from values alone.
    """

    values: np.ndarray
    n_rows: int
    left: np.ndarray = field(default=None, repr=False)
    right: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        d = np.array(self.values, dtype=float)
        if d.ndim != 1 or d.size == 0:
            raise InputError("singular values must form a non-empty vector")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise InputError("singular values must be finite and nonnegative")
        if np.any(np.diff(d) > 0):
            raise InputError("singular values must be sorted in decreasing order")
        if self.n_rows < d.size:
            raise InputError(f"n_rows={self.n_rows} is smaller than p={d.size}")
        d.setflags(write=False)
        object.__setattr__(self, "values", d)

    @classmethod
    def from_values(cls, values, n_rows):
        """Spectrum without singular vectors; values are sorted for you."""
        d = np.sort(np.asarray(values, dtype=float))[::-1]
        return cls(d, int(n_rows))

    @property
    def p(self):
        return self.values.size

    @property
    def N(self):
        return self.n_rows

    def reconstruct(self):
        if self.left is None:
            raise ParameterError("spectrum carries no singular vectors")
        return (self.left * self.values) @ self.right.T


def svd_full(Y):
    """Thin SVD with a deterministic sign convention.

    Each left singular vector is flipped so that its largest-magnitude entry
    is positive; the matching right vector is flipped with it.
    """
    Y = as_observed(Y)
    U, d, Vt = np.linalg.svd(Y.entries, full_matrices=False)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    V = Vt.T * signs
    return SingularSpectrum(d, Y.rows, U, V)


@dataclass(frozen=True)
class QuadratureConfig:
    nodes_per_panel: int = 10
    max_panels: int = 20000
    rel_tol: float = 1e-10
    tail_drop_nats: float = 46.0

    def __post_init__(self):
        if self.nodes_per_panel < 4:
            raise ParameterError("nodes_per_panel must be at least 4")
        if not 0 < self.rel_tol <= 1e-3:
            raise ParameterError("rel_tol must lie in (0, 1e-3]")
        if self.tail_drop_nats < 30:
            raise ParameterError("tail_drop_nats must be at least 30")
        if self.max_panels < 1:
            raise ParameterError("max_panels must be positive")


DEFAULT_QUADRATURE = QuadratureConfig()


def log_add(a, b):
    """log(exp(a) + exp(b)) without overflow; handles -inf."""
    return float(np.logaddexp(a, b))


def log_csv_integrand(z, d, k, delta, sigma2, N, p):
    """Log of the conditional density kernel of the k-th singular value.

    Parameters
    ----------
    z : float or ndarray
        Evaluation points, z >= 0.
    d : array_like
        Observed singular values (length p).
    k : int
        1-based index of the singular value being integrated out.
    delta, sigma2 : float
        Centre and variance of the Gaussian factor.
    N, p : int
        Matrix dimensions.

    Returns
    -------
    float or ndarray
        ``-(z-delta)^2/(2 sigma2) + (N-p) log z + sum_{j != k} log|z^2 - d_j^2|``
    """
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    d = np.asarray(d, dtype=float)
    if not 1 <= k <= d.size:
        raise ParameterError(f"k={k} out of range 1..{d.size}")
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    others = np.delete(d, k - 1) ** 2
    with np.errstate(divide="ignore"):
        out = -((z - delta) ** 2) / (2.0 * sigma2)
        if N != p:
            out = out + (N - p) * np.log(z)
        if others.size:
            out = out + np.log(np.abs(z[:, None] ** 2 - others[None, :])).sum(axis=1)
    return float(out[0]) if scalar else out


def csv_log_kernel(d, k, delta, sigma2, N, p):
    """Vectorised closure equivalent to :func:`log_csv_integrand`."""
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    d = np.asarray(d, dtype=float)
    if not 1 <= k <= d.size:
        raise ParameterError(f"k={k} out of range 1..{d.size}")
    others = np.delete(d, k - 1) ** 2
    power = N - p
    inv = 1.0 / (2.0 * sigma2)

    def logf(z):
        with np.errstate(divide="ignore"):
            out = -((z - delta) ** 2) * inv
            if power:
                out += power * np.log(z)
            if others.size:
                out += np.log(np.abs(np.subtract.outer(z * z, others))).sum(axis=-1)
        return out

    return logf


def _logsumexp(v, axis=None):
    m = np.max(v, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else float(out.reshape(()))


_GL_CACHE = {}


def _gauss_legendre(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (x, np.log(w))
    return _GL_CACHE[n]


def _panel_logs(logf, a, b, x, logw):
    """Log of n-point Gauss-Legendre estimates on each panel [a_i, b_i]."""
    half = 0.5 * (b - a)
    z = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(logf(z.ravel()), dtype=float).reshape(z.shape)
    if np.isnan(vals).any():
        bad = z[np.isnan(vals)][0]
        raise NumericalError(f"integrand returned NaN at z={bad!r}")
    with np.errstate(divide="ignore"):
        return _logsumexp(vals + logw[None, :], axis=1) + np.log(half)


def _truncate_upper(logf, lower, cfg):
    """Finite stand-in for an infinite upper limit.

    Returns the truncation point and a few interior breakpoints (the scan
    grid and the located mode) that help the adaptive stage find the mass.
    """
    h0 = max(abs(lower), 1.0) * 1e-3
    grid = lower + h0 * 2.0 ** np.arange(0, 64)
    grid = grid[np.isfinite(grid)]
    vals = np.asarray(logf(grid), dtype=float)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    running = np.maximum.accumulate(vals)
    j_max = None
    for j in range(grid.size):
        if vals[j] == running[j]:
            j_max = j
        if j_max is not None and vals[j] < running[j] - cfg.tail_drop_nats and j > j_max:
            break
    else:
        raise NumericalError("could not locate a decaying tail for the infinite upper limit")
    if j_max is None or not np.isfinite(running[j]):
        return grid[1], []
    lo_b = grid[j_max - 1] if j_max > 0 else lower
    hi_b = grid[j_max + 1]
    res = optimize.minimize_scalar(
        lambda t: -float(logf(np.array([t]))[0]), bounds=(lo_b, hi_b), method="bounded",
        options={"xatol": 1e-10 * max(1.0, abs(hi_b))},
    )
    mode, peak = res.x, -res.fun
    if vals[j_max] > peak:
        mode, peak = grid[j_max], vals[j_max]
    target = peak - cfg.tail_drop_nats
    g = lambda t: float(logf(np.array([t]))[0]) - target
    a = mode
    b = grid[j]
    if g(b) >= 0:
        return b, [t for t in list(grid[:j]) + [mode] if lower < t < b]
    upper = optimize.brentq(g, a, b, xtol=1e-12 * max(1.0, abs(b)))
    points = [t for t in list(grid[:j]) + [mode] if lower < t < upper]
    return upper, points


def integrate_log(logf, lower, upper, cfg=None, points=None):
    """Log of the integral of ``exp(logf)`` over ``[lower, upper]``.

    Adaptive Gauss-Legendre panels, each compared with its two halves; the
    panels carrying the largest share of the error are bisected until the
    summed error falls below ``cfg.rel_tol`` relative to the total.  An
    infinite ``upper`` is replaced by the first point beyond the mode where
    ``logf`` falls ``cfg.tail_drop_nats`` below its maximum.

    ``logf`` must accept a 1-d array of abscissae.  ``points`` optionally
    lists interior breakpoints.

    Returns
    -------
    float
        Log of the integral; ``-inf`` if the integrand vanishes.

    Raises
    ------
    NumericalError
        If ``cfg.max_panels`` is exceeded.  ``estimate`` and ``achieved``
        carry the log-integral and the relative error reached.
    """
    cfg = cfg or DEFAULT_QUADRATURE
    lower = float(lower)
    upper = float(upper)
    if not upper > lower:
        raise ParameterError(f"need lower < upper, got [{lower}, {upper}]")
    extra = list(points or [])
    if np.isinf(upper):
        upper, tail_points = _truncate_upper(logf, lower, cfg)
        extra += tail_points
    x, logw = _gauss_legendre(cfg.nodes_per_panel)

    edges = np.unique(np.clip(np.r_[lower, extra, upper], lower, upper))
    edges = np.unique(np.r_[edges, np.linspace(lower, upper, 9)])
    a, b = edges[:-1], edges[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    mid = 0.5 * (a + b)
    coarse = _panel_logs(logf, a, b, x, logw)
    left = _panel_logs(logf, a, mid, x, logw)
    right = _panel_logs(logf, mid, b, x, logw)

    while True:
        fine = np.logaddexp(left, right)
        total = _logsumexp(fine)
        if not np.isfinite(total):
            if total == -np.inf:
                return -np.inf
            raise NumericalError("integral overflowed in log space")
        err = np.abs(np.exp(fine - total) - np.exp(coarse - total))
        achieved = err.sum()
        if achieved <= cfg.rel_tol:
            return float(total)
        if a.size >= cfg.max_panels:
            raise NumericalError(
                f"quadrature did not converge within {cfg.max_panels} panels",
                estimate=float(total), achieved=float(achieved),
            )
        split = err > 0.5 * cfg.rel_tol / a.size
        split &= err >= np.sort(err)[-1] * 1e-3
        mid = 0.5 * (a + b)
        width_ok = (mid > a) & (b > mid)
        split &= width_ok
        if not split.any():
            raise NumericalError(
                "quadrature stalled: panels cannot be subdivided further",
                estimate=float(total), achieved=float(achieved),
            )
        sa, sb, sm = a[split], b[split], mid[split]
        na = np.r_[sa, sm]
        nb = np.r_[sm, sb]
        ncoarse = np.r_[left[split], right[split]]
        nmid = 0.5 * (na + nb)
        nleft = _panel_logs(logf, na, nmid, x, logw)
        nright = _panel_logs(logf, nmid, nb, x, logw)
        stay = ~split
        a = np.r_[a[stay], na]
        b = np.r_[b[stay], nb]
        coarse = np.r_[coarse[stay], ncoarse]
        left = np.r_[left[stay], nleft]
        right = np.r_[right[stay], nright]
