"""
How many components do the 88 x 5 exam marks carry?

Walks through the full analysis: scree values, the two noise estimates that
need no rank, the sequential CSV tests at each estimate, StrongStop, and an
exact interval for the leading signal parameter.

    python demos/exam_scores.py
"""

import numpy as np

from pcarank import (confidence_interval, estimate_noise, estimate_rank, load_exam_scores,
                     sequential_pvalues, svd_full)
from pcarank.io import EXAM_SUBJECTS


def main():
    Y = load_exam_scores()
    spec = svd_full(Y)
    print(f"{Y.shape[0]} students, subjects: {', '.join(EXAM_SUBJECTS)}")
    print("singular values:", np.round(spec.values, 2))

    med = estimate_noise(Y, "median")
    cv = estimate_noise(Y, "lambda_df_c", rng=0)
    print(f"\nnoise variance, Marchenko-Pastur median: {med.sigma2:.3f}")
    print(f"noise variance, CV soft-threshold (df, c=2/3): {cv.sigma2:.3f} "
          f"(lambda={cv.lambda_used:.2f}, df={cv.df})")

    # 75.957 is the CV estimate that reproduces the two-component reading
    for sigma2 in (med.sigma2, 75.957):
        p = sequential_pvalues(spec, sigma2)
        rank = estimate_rank(spec, noise=sigma2).kappa_hat
        print(f"\nsigma2 = {sigma2:.3f}")
        for k, v in enumerate(p, start=1):
            print(f"  step {k}: p = {v:.3f}")
        print(f"  StrongStop (alpha 0.05) selects rank {rank}")

    ci = confidence_interval(spec, 1, med.sigma2, 0.95)
    print(f"\n95% interval for <U_1 V_1^T, B>: ({ci.lower:.1f}, {ci.upper:.1f}); "
          f"d_1 = {spec.values[0]:.1f}")


if __name__ == "__main__":
    main()
