"""
Noise level estimation when the rank is unknown.

Three families are provided:

* ``sigma_simple`` -- residual energy beyond a known rank,
* ``sigma_med`` -- median singular value calibrated by the Marchenko-Pastur
  median,
* ``sigma_hat`` -- residual of the nuclear-norm proximal fit
  ``argmin 1/2 ||Y - B||_F^2 + lambda ||B||_*`` with a degrees-of-freedom
  correction, ``lambda`` chosen by cross-validated softImpute.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import DegenerateError, InputError, ParameterError
from .spectra import SingularSpectrum, as_observed, svd_full

__all__ = [
    "NoiseEstimate", "MaskedMatrix", "SoftImputeResult", "VARIANTS",
    "soft_threshold_svd", "soft_impute", "lambda_grid", "cv_partition", "cv_errors",
    "cv_select_lambda", "sigma_hat", "sigma_med", "sigma_simple", "mp_median",
    "estimate_noise",
]

VARIANTS = ("simple", "lambda", "lambda_df", "lambda_df_c", "median")
DEFAULT_C = 2.0 / 3.0
DEFAULT_FOLDS = 20


@dataclass(frozen=True)
class NoiseEstimate:
    sigma2: float
    variant: str
    lambda_used: float = None
    df: int = None
    c: float = None
    cv_folds: int = None
    kappa: int = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise DegenerateError(f"noise estimate must be positive, got {self.sigma2}")

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class MaskedMatrix:
    """Data matrix together with the set of observed positions ``Omega``."""

    base: object
    observed_mask: np.ndarray

    def __post_init__(self):
        base = as_observed(self.base)
        mask = np.asarray(self.observed_mask, dtype=bool)
        if base.transposed and mask.shape == base.shape[::-1]:
            mask = mask.T
        if mask.shape != base.shape:
            raise InputError(f"mask shape {mask.shape} does not match data shape {base.shape}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "observed_mask", mask)

    @property
    def degenerate(self):
        """True if some row or column has no observed entry."""
        m = self.observed_mask
        return bool(np.any(~m.any(axis=0)) or np.any(~m.any(axis=1)))


def _svt(X, lam):
    U, d, Vt = np.linalg.svd(X, full_matrices=False)
    s = d - lam
    # lam == d_1 computed by a different routine may differ in the last bit
    s[s <= 8 * np.finfo(float).eps * (d[0] if d.size else 0.0)] = 0.0
    r = int(np.count_nonzero(s))
    return (U[:, :r] * s[:r]) @ Vt[:r], r, float(s.sum())


def soft_threshold_svd(Y, lam):
    """Proximal map of the nuclear norm: shrink every singular value by ``lam``.

    Returns ``(B_hat, df)`` with ``df`` the number of singular values above
    ``lam``.

    >>> B, df = soft_threshold_svd(np.diag([3.0, 1.0]), 2.0)
    >>> B.round(12).tolist(), df
    ([[1.0, 0.0], [0.0, 0.0]], 1)
    """
    if not lam >= 0:
        raise ParameterError(f"lambda must be nonnegative, got {lam}")
    X = np.asarray(getattr(Y, "entries", Y), dtype=float)
    B, df, _ = _svt(X, lam)
    return B, df


@dataclass
class SoftImputeResult:
    matrix: np.ndarray
    converged: bool
    iterations: int
    relative_change: float
    df: int
    objective: list = field(default_factory=list, repr=False)
    monotone: bool = True


def _objective(resid_obs, lam, nuclear):
    return 0.5 * float(np.sum(resid_obs**2)) + lam * nuclear


def soft_impute(masked, lam, tol=1e-7, max_iter=500, init=None):
    """softImpute for ``min 1/2 ||P_Omega(Y - B)||_F^2 + lam ||B||_*``.

    Iterates ``B <- SVT(P_Omega(Y) + P_Omega^perp(B), lam)`` until the
    relative Frobenius change falls below ``tol``.  The objective is
    recorded at every iterate; ``monotone`` reports whether it never
    increased (relative slack 1e-12).
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if max_iter < 1:
        raise ParameterError("max_iter must be positive")
    Y = masked.base.entries
    mask = masked.observed_mask
    Yobs = np.where(mask, Y, 0.0)
    B = np.zeros_like(Y) if init is None else np.array(init, dtype=float)
    history = []
    change = np.inf
    df = 0
    for it in range(1, max_iter + 1):
        B_new, df, nuc = _svt(np.where(mask, Yobs, B), lam)
        history.append(_objective((Y - B_new)[mask], lam, nuc))
        diff = np.linalg.norm(B_new - B)
        scale = np.linalg.norm(B)
        change = 0.0 if diff == 0 else diff / scale if scale > 0 else np.inf
        B = B_new
        if change <= tol:
            break
    h = np.asarray(history)
    monotone = bool(np.all(h[1:] <= h[:-1] + 1e-12 * np.abs(h[:-1]) + 1e-300))
    return SoftImputeResult(B, bool(change <= tol), it, float(change), df, history, monotone)


def lambda_grid(Y, size=50, span=1e-3):
    """Log-spaced grid from ``d_1`` down to ``d_1 * span``."""
    d1 = np.linalg.norm(np.asarray(getattr(Y, "entries", Y), dtype=float), 2)
    if d1 == 0:
        raise DegenerateError("matrix is identically zero")
    return np.geomspace(d1, d1 * span, size)


def cv_partition(shape, folds, rng, max_attempts=10):
    """Random partition of all entry positions into ``folds`` near-equal sets.

    Returns an integer array of fold labels with ``shape``.  Partitions in
    which hiding some fold leaves a row or column fully unobserved are
    redrawn, up to ``max_attempts`` times.
    """
    n = int(np.prod(shape))
    if not 2 <= folds <= n:
        raise ParameterError(f"folds must lie in [2, {n}], got {folds}")
    for _ in range(max_attempts):
        labels = np.empty(n, dtype=int)
        for f, idx in enumerate(np.array_split(rng.permutation(n), folds)):
            labels[idx] = f
        labels = labels.reshape(shape)
        ok = all(
            (labels != f).any(axis=0).all() and (labels != f).any(axis=1).all()
            for f in range(folds)
        )
        if ok:
            return labels
    raise DegenerateError(
        f"could not draw a {folds}-fold partition leaving every row and column observed")


class _Folds:
    """Held-out folds of one partition with warm-start state per fold."""

    def __init__(self, Y, labels, tol, max_iter):
        self.Y = Y
        self.hidden = [labels == f for f in range(labels.max() + 1)]
        self.masked = [MaskedMatrix(Y, ~h) for h in self.hidden]
        self.tol, self.max_iter = tol, max_iter

    def error(self, lam, inits):
        """Mean held-out squared error at ``lam`` and the fitted matrices."""
        total, fits = 0.0, []
        for h, m, B0 in zip(self.hidden, self.masked, inits):
            B = soft_impute(m, lam, self.tol, self.max_iter, init=B0).matrix
            total += np.sum((self.Y.entries[h] - B[h]) ** 2)
            fits.append(B)
        return total / len(self.hidden), fits


def _check_grid(Y, grid):
    grid = lambda_grid(Y) if grid is None else np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ParameterError("grid must be non-empty")
    if np.any(np.diff(grid) > 0):
        raise ParameterError("grid must be sorted in decreasing order")
    if np.any(grid <= 0):
        raise ParameterError("grid values must be positive")
    return grid


FLAT_RTOL = 1e-6


def _grid_search(Y, folds, grid, rng, tol, max_iter):
    """Held-out errors along a decreasing grid and the index of the minimum.

    Every fold's fit is warm-started from its solution at the previous grid
    value.  A new minimum must improve by a relative ``FLAT_RTOL``, so a flat
    stretch of the curve keeps its largest lambda.
    """
    Y = as_observed(Y)
    grid = _check_grid(Y, grid)
    cv = _Folds(Y, cv_partition(Y.shape, folds, np.random.default_rng(rng)), tol, max_iter)
    err = np.empty(grid.size)
    fits = [None] * folds
    best = 0
    for i, lam in enumerate(grid):
        err[i], fits = cv.error(lam, fits)
        if err[i] < err[best] * (1 - FLAT_RTOL):
            best = i
    return grid, err, best


def cv_errors(Y, folds=DEFAULT_FOLDS, grid=None, rng=None, tol=1e-7, max_iter=500):
    """Mean held-out squared error for each ``lambda`` in ``grid``."""
    grid, err, _ = _grid_search(Y, folds, grid, rng, tol, max_iter)
    return grid, err


def cv_select_lambda(Y, folds=DEFAULT_FOLDS, grid=None, rng=None, tol=1e-7, max_iter=500):
    """Grid ``lambda`` minimising the cross-validated held-out error.

    Below the smallest singular value worth keeping the error curve is flat
    to within rounding; values within a relative ``1e-6`` of the running
    minimum count as ties, which go to the largest ``lambda``.
    """
    grid_arr = None if grid is None else np.asarray(grid, dtype=float).ravel()
    if grid_arr is not None and grid_arr.size == 1:
        return float(grid_arr[0])
    grid, _, i = _grid_search(Y, folds, grid, rng, tol, max_iter)
    return float(grid[i])


def sigma_hat(Y, lam, variant="lambda_df_c", c=DEFAULT_C, cv_folds=None):
    """Residual variance of the nuclear-norm fit at ``lam``.

    The residual sum of squares is divided by ``N p`` (``"lambda"``),
    ``N (p - df)`` (``"lambda_df"``) or ``N (p - c df)`` (``"lambda_df_c"``).
    """
    if variant not in ("lambda", "lambda_df", "lambda_df_c"):
        raise ParameterError(f"variant must be lambda, lambda_df or lambda_df_c, got {variant!r}")
    if not 0 <= c <= 1:
        raise ParameterError(f"c must lie in [0, 1], got {c}")
    Y = as_observed(Y)
    N, p = Y.shape
    B, df = soft_threshold_svd(Y, lam)
    rss = float(np.sum((Y.entries - B) ** 2))
    shrink = {"lambda": 0.0, "lambda_df": 1.0, "lambda_df_c": c}[variant]
    denom = N * (p - shrink * df)
    if denom <= 0:
        raise DegenerateError(f"denominator N(p - {shrink:g} df) = {denom:g} is not positive")
    return NoiseEstimate(rss / denom, variant, float(lam), int(df),
                         c if variant == "lambda_df_c" else None, cv_folds)


def _mp_edges(ratio):
    return (1 - np.sqrt(ratio)) ** 2, (1 + np.sqrt(ratio)) ** 2


def _mp_cdf(t, ratio):
    a, b = _mp_edges(ratio)
    if t <= a:
        return 0.0
    if t >= b:
        return 1.0
    # (x - a)^alpha weight absorbs the edge behaviour (alpha = -1/2 when a = 0)
    if a > 0:
        f = lambda x: np.sqrt(b - x) / (2 * np.pi * ratio * x)
        val, _ = integrate.quad(f, a, t, weight="alg", wvar=(0.5, 0.0), epsabs=1e-13, epsrel=1e-12)
    else:
        f = lambda x: np.sqrt(b - x) / (2 * np.pi * ratio)
        val, _ = integrate.quad(f, a, t, weight="alg", wvar=(-0.5, 0.0), epsabs=1e-13, epsrel=1e-12)
    return val


@lru_cache(maxsize=256)
def mp_median(ratio):
    """Median of the Marchenko-Pastur law with aspect ratio ``ratio = p/N``.

    This is the limiting median eigenvalue of ``X^T X / N`` for an ``N x p``
    matrix of iid standard normals.
    """
    ratio = float(ratio)
    if not 0 <= ratio <= 1:
        raise ParameterError(f"ratio must lie in [0, 1], got {ratio}")
    if ratio < 1e-12:
        return 1.0
    a, b = _mp_edges(ratio)
    return optimize.brentq(lambda t: _mp_cdf(t, ratio) - 0.5, a, b, xtol=1e-12, rtol=1e-12)


def _spectrum_of(Y):
    return Y if isinstance(Y, SingularSpectrum) else svd_full(Y)


def sigma_med(Y):
    """``d_med^2 / (N mu)``, with ``d_med`` the median singular value and ``mu``
    the Marchenko-Pastur median for ``p / N``.

    For even ``p`` the two middle singular values are averaged.
    """
    spec = _spectrum_of(Y)
    N, p = spec.N, spec.p
    if p < 2:
        raise ParameterError("the median estimator needs at least two columns")
    d_med = np.median(spec.values)
    return NoiseEstimate(float(d_med**2 / (N * mp_median(p / N))), "median")


def sigma_simple(spectrum, kappa, N=None):
    """``sum_{j > kappa} d_j^2 / (N (p - kappa))``."""
    spectrum = _spectrum_of(spectrum)
    N = spectrum.N if N is None else N
    p = spectrum.p
    if not 0 <= kappa < p:
        raise ParameterError(f"kappa must lie in [0, {p - 1}], got {kappa}")
    tail = spectrum.values[kappa:]
    return NoiseEstimate(float(np.sum(tail**2) / (N * (p - kappa))), "simple", kappa=int(kappa))


def estimate_noise(Y, variant="median", kappa=None, lam=None, c=DEFAULT_C, folds=DEFAULT_FOLDS,
                   grid=None, rng=None):
    """Dispatch to one estimator; ``lambda`` variants cross-validate ``lam`` if not given."""
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if variant == "median":
        return sigma_med(Y)
    if variant == "simple":
        if kappa is None:
            raise ParameterError("the simple estimator needs the rank kappa")
        return sigma_simple(Y, kappa)
    Y = as_observed(Y)
    used_folds = None
    if lam is None:
        lam = cv_select_lambda(Y, folds, grid, rng)
        used_folds = folds
    return sigma_hat(Y, lam, variant, c, used_folds)
