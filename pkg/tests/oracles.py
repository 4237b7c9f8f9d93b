"""
Brute-force reference implementations used to check the library.

Nothing here imports the package's numerical code paths; each oracle is a
direct, slow transcription of the defining formula.
"""

import math

import numpy as np
from scipy import integrate


# ----------------------------------------------------------------- CSV ratio

def csv_log_integrand(z, d, k, delta, sigma2, N):
    """log of exp(-(z-delta)^2/2s^2) z^(N-p) prod_{j != k} |z^2 - d_j^2| (vectorised)."""
    d = np.asarray(d, dtype=float)
    p = d.size
    z = np.asarray(z, dtype=float)
    out = -((z - delta) ** 2) / (2 * sigma2)
    with np.errstate(divide="ignore"):
        out = out + (N - p) * np.log(z) if N > p else out
        for j in range(p):
            if j != k - 1:
                out = out + np.log(np.abs(z**2 - d[j] ** 2))
    return out


def trapezoid_log(logf, a, b, n=1_000_001):
    """log of the trapezoid rule for exp(logf) on [a, b] with n points."""
    z = np.linspace(a, b, n)
    v = logf(z)
    m = np.max(v[np.isfinite(v)])
    w = np.exp(v - m)
    return m + math.log(np.trapezoid(w, z))


def csv_oracle(d, k, sigma2, N, delta=0.0, n=1_000_001):
    """The conditional survival ratio by trapezoid rule on 1e6-point grids."""
    d = np.sort(np.asarray(d, dtype=float))[::-1]
    sigma = math.sqrt(sigma2)
    f = lambda z: csv_log_integrand(z, d, k, delta, sigma2, N)
    lo = d[k] if k < d.size else 0.0
    if k == 1:
        p = d.size
        # well past both the data and the mode of the Gaussian-polynomial tail
        hi = max(d[0], delta, math.sqrt(N + p) * sigma) + 40 * sigma
    else:
        hi = d[k - 2]
    num = trapezoid_log(f, d[k - 1], hi, n)
    den = trapezoid_log(f, lo, hi, n)
    return math.exp(num - den)


# ----------------------------------------------------------------- chi-square

def _gamma_series(a, x, eps=1e-16, itmax=10_000):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(itmax):
        ap += 1
        term *= x / ap
        total += term
        if abs(term) < abs(total) * eps:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x, eps=1e-16, itmax=10_000):
    tiny = 1e-300
    b = x + 1 - a
    c = 1 / tiny
    dd = 1 / b
    h = dd
    for i in range(1, itmax):
        an = -i * (i - a)
        b += 2
        dd = an * dd + b
        dd = tiny if abs(dd) < tiny else dd
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        dd = 1 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1) < eps:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi2_sf_oracle(x, df):
    """Regularised upper incomplete gamma Q(df/2, x/2): series below a+1,
    continued fraction above."""
    if x <= 0:
        return 1.0
    a, y = df / 2.0, x / 2.0
    if y < a + 1:
        return 1.0 - _gamma_series(a, y)
    return _gamma_cf(a, y)


# ----------------------------------------------------------------- integrated CSV, two trailing values

def icsv_two_dim_oracle(d, k, sigma2, N):
    """Integrated CSV p-value when p - k + 1 = 2, by nested adaptive quadrature.

    Integrand over y_k >= y_p >= 0 (q = 2 trailing values, n = N - k + 1 rows):
        exp(-(y1^2 + y2^2)/2s^2) (y1 y2)^(n-2) (y1^2 - y2^2)
        * prod_{i<k} (d_i^2 - y1^2)(d_i^2 - y2^2) * 1{y1 <= d_{k-1}}
    """
    d = np.sort(np.asarray(d, dtype=float))[::-1]
    p = d.size
    assert p - k + 1 == 2
    n = N - k + 1
    lead = d[: k - 1] ** 2
    cap = d[k - 2]

    def g(y2, y1):
        y1s, y2s = y1 * y1, y2 * y2
        if y2 <= 0 or y1s <= y2s:
            return 0.0
        v = -(y1s + y2s) / (2 * sigma2) + (n - 2) * (math.log(y1) + math.log(y2))
        v += math.log(y1s - y2s)
        for l in lead:
            v += math.log(l - y1s) + math.log(l - y2s)
        return math.exp(v)

    opts = dict(epsabs=0, epsrel=1e-11)
    num, _ = integrate.dblquad(g, d[k - 1], cap, 0, lambda y1: y1, **opts)
    den, _ = integrate.dblquad(g, 0, cap, 0, lambda y1: y1, **opts)
    return num / den


# ----------------------------------------------------------------- Tracy-Widom reference values

# order-1 Tracy-Widom distribution: published high-precision values
TW1_MEAN = -1.2065335745820
TW1_VARIANCE = 1.6077810345810
TW1_QUANTILES = {0.50: -1.2685, 0.90: 0.4501, 0.95: 0.9793, 0.99: 2.0234}
