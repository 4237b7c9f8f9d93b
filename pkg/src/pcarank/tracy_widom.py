"""
Order-1 Tracy-Widom law (largest eigenvalue of real Wishart/GOE matrices).

Runtime evaluation uses a shipped quantile table with monotone cubic
interpolation.  :func:`fredholm_cdf` evaluates the distribution function
directly as ``det(I - K)`` on ``L^2(s, inf)`` with kernel
``K(x, y) = Ai((x + y) / 2) / 2``; it is what generated the table
(``tools/make_tw1_table.py``) and serves as a check on it.
"""

from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import airy

from .errors import ParameterError

TABLE_FILE = "tw1_quantiles.txt"


def fredholm_cdf(s, nodes=80):
    """F_1(s) by Gauss-Legendre discretisation of the Fredholm determinant."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    hi = max(s, 0.0) + 18.0
    z = s + (hi - s) * (x + 1) / 2
    w = w * (hi - s) / 2
    K = 0.5 * airy((z[:, None] + z[None, :]) / 2)[0]
    sw = np.sqrt(w)
    return float(np.linalg.det(np.eye(nodes) - sw[:, None] * K * sw[None, :]))


class TracyWidomTable:
    """Immutable (probability, threshold) pairs with ``probability = F_1(threshold)``."""

    def __init__(self, probabilities, thresholds, version=None):
        prob = np.asarray(probabilities, dtype=float)
        thr = np.asarray(thresholds, dtype=float)
        if prob.shape != thr.shape or prob.ndim != 1 or prob.size < 2:
            raise ParameterError("table columns must be equal-length vectors")
        if np.any(np.diff(prob) <= 0) or np.any(np.diff(thr) <= 0):
            raise ParameterError("Tracy-Widom table must be strictly increasing in both columns")
        if prob[0] <= 0 or prob[-1] >= 1:
            raise ParameterError("table probabilities must lie in (0, 1)")
        prob.setflags(write=False)
        thr.setflags(write=False)
        self.probabilities = prob
        self.thresholds = thr
        self.version = version
        self._quantile = PchipInterpolator(prob, thr, extrapolate=False)
        self._cdf = PchipInterpolator(thr, prob, extrapolate=False)

    def quantile(self, prob):
        """Threshold ``s`` with ``F_1(s) = prob``."""
        if not self.probabilities[0] <= prob <= self.probabilities[-1]:
            raise ParameterError(
                f"probability {prob} outside tabulated range "
                f"[{self.probabilities[0]}, {self.probabilities[-1]}]"
            )
        return float(self._quantile(prob))

    def cdf(self, s):
        """``(F_1(s), clamped)``; values beyond the table are clamped to its ends."""
        if s < self.thresholds[0]:
            return float(self.probabilities[0]), True
        if s > self.thresholds[-1]:
            return float(self.probabilities[-1]), True
        return float(self._cdf(s)), False

    @classmethod
    def from_text(cls, text):
        version = None
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.lower().startswith("# version:"):
                    version = line.split(":", 1)[1].strip()
                continue
            a, b = line.split()
            rows.append((float(a), float(b)))
        prob, thr = zip(*rows)
        return cls(prob, thr, version)


@lru_cache(maxsize=1)
def default_table():
    text = resources.files("pcarank").joinpath("data").joinpath(TABLE_FILE).read_text()
    return TracyWidomTable.from_text(text)
