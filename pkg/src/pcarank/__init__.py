"""
Exact inference for the rank of a low-rank signal observed in Gaussian noise.

The model is ``Y = B + E`` with ``E`` iid ``N(0, sigma^2)``.  The package
provides

* the conditional singular value (CSV) test of ``rank(B) < k`` and its
  integrated variant (ICSV), with exact confidence intervals for
  ``<U_k V_k^T, B>``;
* the Tracy-Widom pseudorank and Muirhead likelihood ratio baselines;
* SimpleStop / StrongStop rank selection;
* noise level estimators that do not need the rank;
* the simulation designs used to check calibration, coverage and rank
  recovery.
"""

__version__ = "0.1.0"

from .baselines import muirhead_test, pseudorank_test, tw1_quantile
from .errors import (DegenerateError, InputError, NumericalError, ParameterError, PcarankError,
                     UnsupportedError)
from .exact import (ConfidenceInterval, TestOutcome, confidence_interval, csv_statistic,
                    csv_test, global_null_statistic, sequential_kac_rice, sequential_pvalues,
                    sequential_tests, signal_parameter)
from .icsv import ISConfig, icsv_statistic
from .io import AnalysisReport, load_exam_scores, read_matrix
from .noise import (MaskedMatrix, NoiseEstimate, cv_select_lambda, estimate_noise, mp_median,
                    sigma_hat, sigma_med, sigma_simple, soft_impute, soft_threshold_svd)
from .spectra import ObservedMatrix, QuadratureConfig, SingularSpectrum, svd_full
from .stopping import RankDecision, estimate_rank, simple_stop, strong_stop
from .tracy_widom import TracyWidomTable, default_table

__all__ = [
    "AnalysisReport", "ConfidenceInterval", "DegenerateError", "ISConfig", "InputError",
    "MaskedMatrix", "NoiseEstimate", "NumericalError", "ObservedMatrix", "ParameterError",
    "PcarankError", "QuadratureConfig", "RankDecision", "SingularSpectrum", "TestOutcome",
    "TracyWidomTable", "UnsupportedError", "confidence_interval", "csv_statistic", "csv_test",
    "cv_select_lambda", "default_table", "estimate_noise", "estimate_rank",
    "global_null_statistic", "icsv_statistic", "load_exam_scores", "mp_median", "muirhead_test",
    "pseudorank_test", "read_matrix", "sequential_kac_rice", "sequential_pvalues",
    "sequential_tests", "sigma_hat", "sigma_med", "sigma_simple", "signal_parameter",
    "simple_stop", "soft_impute", "soft_threshold_svd", "strong_stop", "svd_full",
    "tw1_quantile",
]
