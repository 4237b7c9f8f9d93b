"""
Simulation designs and the experiment suites built on them.

Data follow ``Y = B + E`` with ``B = U diag(Lambda) V^T``,
``Lambda_i = m * i * sigma * (N p)^(1/4)`` for ``i <= rank`` and ``U``, ``V``
the singular vectors of an independent Gaussian matrix.  The noise is
Gaussian, a scaled t_5 (heavy tail) or a t_5 / centred exponential mixture
(right skew), always with variance ``sigma2``.

Randomness: replication ``r`` of an experiment run with seed ``s`` uses
``Generator(Philox(SeedSequence([s, r])))``.  Streams therefore do not depend
on the order in which replications are evaluated, and designs run with the
same seed share their random inputs.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .baselines import muirhead_test, pseudorank_test
from .errors import NumericalError, ParameterError
from .exact import (confidence_interval, csv_test, sequential_kac_rice, sequential_tests,
                    signal_parameter)
from .icsv import ISConfig, icsv_statistic
from .noise import VARIANTS, estimate_noise
from .spectra import svd_full
from .stopping import decide

__all__ = [
    "SignalSpec", "NoiseSpec", "Design", "NOISE_KINDS", "replicate_rng", "signal_magnitudes",
    "generate_signal", "generate_noise", "simulate", "CalibrationResult", "CoverageResult",
    "RankResult", "run_null_calibration", "run_coverage", "run_rank_experiment", "write_table",
]

NOISE_KINDS = ("gaussian", "heavy_tail", "right_skew")


@dataclass(frozen=True)
class SignalSpec:
    N: int
    p: int
    rank: int = 0
    m: float = 0.0
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.N >= self.p >= 2:
            raise ParameterError(f"need N >= p >= 2, got N={self.N}, p={self.p}")
        if not 0 <= self.rank < self.p:
            raise ParameterError(f"rank must lie in [0, p-1], got {self.rank}")
        if self.m < 0:
            raise ParameterError("m must be nonnegative")
        if not self.sigma2 > 0:
            raise ParameterError("sigma2 must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if not self.sigma2 > 0:
            raise ParameterError("sigma2 must be positive")


@dataclass(frozen=True)
class Design:
    """A simulation design and how the tests learn the noise level.

    ``sigma`` is ``"known"`` (use the true ``sigma2``) or the name of a noise
    estimator variant (``"median"``, ``"lambda_df_c"``, ...).
    """

    signal: SignalSpec
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sigma: str = "known"

    def __post_init__(self):
        if self.sigma != "known" and self.sigma not in VARIANTS:
            raise ParameterError(f"sigma must be 'known' or one of {VARIANTS}, got {self.sigma!r}")
        if self.sigma == "simple":
            raise ParameterError("the simple estimator needs the rank and is not a design option")

    @classmethod
    def make(cls, N, p, rank=0, m=0.0, sigma2=1.0, noise="gaussian", sigma="known"):
        return cls(SignalSpec(N, p, rank, m, sigma2), NoiseSpec(noise, sigma2), sigma)

    def to_dict(self):
        return asdict(self)


def replicate_rng(seed, replication):
    """Independent generator for one replication."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replication)])))


def signal_magnitudes(spec):
    """``m * i * sigma * (N p)^(1/4)`` for ``i = 1..rank``."""
    i = np.arange(1, spec.rank + 1)
    return spec.m * i * np.sqrt(spec.sigma2) * (spec.N * spec.p) ** 0.25


def generate_signal(spec, rng):
    """Rank-``spec.rank`` signal with singular values ``signal_magnitudes(spec)``."""
    rng = np.random.default_rng(rng)
    N, p = spec.N, spec.p
    # draw the rotation even for rank 0 so streams line up across designs
    U, _, Vt = np.linalg.svd(rng.standard_normal((N, p)), full_matrices=False)
    lam = signal_magnitudes(spec)
    r = lam.size
    return (U[:, :r] * lam) @ Vt[:r]


def generate_noise(N, p, spec, rng):
    """``N x p`` iid noise of the requested kind with variance ``spec.sigma2``."""
    rng = np.random.default_rng(rng)
    sigma = np.sqrt(spec.sigma2)
    if spec.kind == "gaussian":
        E = rng.standard_normal((N, p))
    elif spec.kind == "heavy_tail":
        E = np.sqrt(3 / 5) * rng.standard_t(5, (N, p))
    else:
        E = np.sqrt(3 / 10) * rng.standard_t(5, (N, p)) + np.sqrt(1 / 2) * (
            rng.standard_exponential((N, p)) - 1.0)
    return sigma * E


def simulate(design, rng):
    """One draw ``(Y, B)`` from ``design``."""
    s = design.signal
    B = generate_signal(s, rng)
    return B + generate_noise(s.N, s.p, design.noise, rng), B


def _sigma2_for(design, Y, rng):
    if design.sigma == "known":
        return design.noise.sigma2
    return estimate_noise(Y, design.sigma, rng=rng).sigma2


def _ks(x):
    res = stats.kstest(x, "uniform")
    return float(res.statistic), float(res.pvalue)


def _qq_rows(samples, label):
    rows = []
    for step, x in samples.items():
        x = np.sort(x)
        n = x.size
        expected = (np.arange(1, n + 1) - 0.5) / n
        rows.extend((label, step, i + 1, f"{e:.6f}", f"{o:.10g}")
                    for i, (e, o) in enumerate(zip(expected, x)))
    return rows


def write_table(path, header, rows, metadata=None):
    """Tab-separated table plus, if ``metadata`` is given, a ``.meta.json`` sidecar."""
    with open(path, "w", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")
    if metadata is not None:
        with open(str(path) + ".meta.json", "w") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


@dataclass
class CalibrationResult:
    design: Design
    method: str
    reps: int
    seed: int
    steps: list
    pvalues: np.ndarray                 # reps x len(steps)
    control: np.ndarray = None          # sequential global-null p-values, same layout
    sigma2_used: np.ndarray = None
    mc_standard_error: np.ndarray = None

    @property
    def null_steps(self):
        return [k for k in self.steps if k > self.design.signal.rank]

    def column(self, k, control=False):
        src = self.control if control else self.pvalues
        return src[:, self.steps.index(k)]

    def ks(self, control=False):
        """``{step: (KS distance, KS p-value)}`` over the null steps."""
        if control and self.control is None:
            raise ParameterError("no negative control was run")
        return {k: _ks(self.column(k, control)) for k in self.null_steps}

    def rejection_rate(self, k, alpha=0.05):
        return float(np.mean(self.column(k) <= alpha))

    def metadata(self):
        return {"suite": "null_calibration", "design": self.design.to_dict(),
                "method": self.method, "reps": self.reps, "seed": self.seed,
                "steps": self.steps, "rng": "Philox(SeedSequence([seed, replication]))",
                "ks": {str(k): v for k, v in self.ks().items()}}

    def write(self, path):
        """QQ table: label, step, order, expected uniform quantile, observed p-value."""
        samples = {k: self.column(k) for k in self.steps}
        rows = _qq_rows(samples, self.method)
        if self.control is not None:
            rows += _qq_rows({k: self.column(k, True) for k in self.steps}, "sequential_global")
        write_table(path, ["method", "step", "order", "expected", "observed"], rows,
                    self.metadata())


def run_null_calibration(design, method="csv", reps=1000, seed=0, steps=None, control=False,
                         cfg=None, icsv_config=None, progress=None):
    """Step p-values over ``reps`` replications of ``design``.

    Parameters
    ----------
    steps : sequence of int, optional
        Steps to compute (default all ``1..p-1``).  Limiting them matters for
        the integrated test, whose cost grows with the step.
    control : bool
        Also run the naive sequential global-null test on every replication.
    """
    p = design.signal.p
    steps = list(range(1, p)) if steps is None else sorted(int(k) for k in steps)
    if not steps or steps[0] < 1 or steps[-1] > p - 1:
        raise ParameterError(f"steps must lie in [1, {p - 1}]")
    P = np.empty((reps, len(steps)))
    C = np.empty((reps, len(steps))) if control else None
    S2 = np.empty(reps)
    SE = np.full((reps, len(steps)), np.nan)
    for r in range(reps):
        rng = replicate_rng(seed, r)
        Y, _ = simulate(design, rng)
        spec = svd_full(Y)
        s2 = _sigma2_for(design, Y, rng)
        S2[r] = s2
        for j, k in enumerate(steps):
            out = _one_step(spec, k, s2, method, cfg, icsv_config)
            P[r, j] = out.p_value
            SE[r, j] = out.diagnostics.get("mc_standard_error", np.nan)
        if control:
            C[r] = sequential_kac_rice(spec, s2, cfg)[np.array(steps) - 1]
        if progress:
            progress(r + 1, reps)
    return CalibrationResult(design, method, reps, seed, steps, P, C, S2,
                             SE if method == "icsv" else None)


def _one_step(spec, k, sigma2, method, cfg, icsv_config):
    if method == "csv":
        return csv_test(spec, k, sigma2, cfg=cfg)
    if method == "icsv":
        return icsv_statistic(spec, k, sigma2, icsv_config or ISConfig())
    if method == "pseudorank":
        return pseudorank_test(spec, k, sigma2)
    if method == "muirhead":
        return muirhead_test(spec, spec.N, k)
    raise ParameterError(f"unknown method {method!r}")


@dataclass
class CoverageResult:
    design: Design
    level: float
    reps: int
    seed: int
    ks: list
    lower: np.ndarray       # reps x len(ks)
    upper: np.ndarray
    truth: np.ndarray
    failures: int = 0

    @property
    def covered(self):
        return (self.lower <= self.truth) & (self.truth <= self.upper)

    def coverage(self):
        """``{k: coverage rate}`` over replications with a valid interval."""
        ok = np.isfinite(self.lower)
        return {k: float(np.mean(self.covered[ok[:, j], j])) for j, k in enumerate(self.ks)}

    def metadata(self):
        return {"suite": "coverage", "design": self.design.to_dict(), "level": self.level,
                "reps": self.reps, "seed": self.seed, "steps": self.ks,
                "failures": self.failures,
                "coverage": {str(k): v for k, v in self.coverage().items()}}

    def write(self, path):
        rows = []
        for r in range(self.reps):
            for j, k in enumerate(self.ks):
                rows.append((r, k, f"{self.lower[r, j]:.10g}", f"{self.upper[r, j]:.10g}",
                             f"{self.truth[r, j]:.10g}", int(self.covered[r, j])))
        write_table(path, ["replication", "step", "lower", "upper", "truth", "covered"], rows,
                    self.metadata())


def run_coverage(design, level=0.95, reps=1000, seed=0, ks=(1, 2), cfg=None, progress=None):
    """Coverage of the exact intervals for ``<U_k V_k^T, B>``.

    The target is computed from the realised singular vectors of each ``Y``
    and the true ``B``.  Intervals that cannot be formed (degenerate spectra)
    are counted in ``failures`` and excluded.
    """
    ks = [int(k) for k in ks]
    L = np.full((reps, len(ks)), np.nan)
    U = np.full_like(L, np.nan)
    T = np.full_like(L, np.nan)
    failures = 0
    for r in range(reps):
        rng = replicate_rng(seed, r)
        Y, B = simulate(design, rng)
        spec = svd_full(Y)
        s2 = _sigma2_for(design, Y, rng)
        for j, k in enumerate(ks):
            T[r, j] = signal_parameter(spec, B, k)
            try:
                ci = confidence_interval(spec, k, s2, level, cfg, verify=False)
            except NumericalError:
                failures += 1
                continue
            L[r, j], U[r, j] = ci.lower, ci.upper
        if progress:
            progress(r + 1, reps)
    return CoverageResult(design, level, reps, seed, ks, L, U, T, failures)


@dataclass
class RankResult:
    design: Design
    rule: str
    alpha: float
    method: str
    reps: int
    seed: int
    kappa_hat: np.ndarray
    sigma2_used: np.ndarray

    @property
    def rank(self):
        return self.design.signal.rank

    def rate_correct(self):
        return float(np.mean(self.kappa_hat == self.rank))

    def mse(self):
        return float(np.mean((self.kappa_hat - self.rank) ** 2))

    def overestimation_rate(self):
        return float(np.mean(self.kappa_hat > self.rank))

    def summary(self):
        return {"rank": self.rank, "rate_correct": self.rate_correct(), "mse": self.mse(),
                "overestimation": self.overestimation_rate(),
                "mean_sigma2": float(np.mean(self.sigma2_used))}

    def metadata(self):
        return {"suite": "rank", "design": self.design.to_dict(), "rule": self.rule,
                "alpha": self.alpha, "method": self.method, "reps": self.reps,
                "seed": self.seed, "summary": self.summary()}

    def write(self, path):
        rows = [(r, int(k), f"{s:.10g}") for r, (k, s) in
                enumerate(zip(self.kappa_hat, self.sigma2_used))]
        write_table(path, ["replication", "kappa_hat", "sigma2"], rows, self.metadata())


def run_rank_experiment(design, rule="strong", alpha=0.05, reps=1000, seed=0, method="csv",
                        cfg=None, icsv_config=None, progress=None):
    """Rank estimates over ``reps`` replications; the noise level is handled
    according to ``design.sigma``."""
    K = np.empty(reps, dtype=int)
    S2 = np.empty(reps)
    for r in range(reps):
        rng = replicate_rng(seed, r)
        Y, _ = simulate(design, rng)
        spec = svd_full(Y)
        s2 = _sigma2_for(design, Y, rng)
        outcomes = sequential_tests(spec, s2, method, cfg, icsv_config, alpha)
        K[r] = decide([o.p_value for o in outcomes], rule, alpha).kappa_hat
        S2[r] = s2
        if progress:
            progress(r + 1, reps)
    return RankResult(design, rule, alpha, method, reps, seed, K, S2)
