"""Regenerate src/pcarank/data/tw1_quantiles.txt from the Fredholm determinant."""

import pathlib

import numpy as np
from scipy import optimize

from pcarank.tracy_widom import fredholm_cdf

VERSION = "1"


def quantile(prob):
    return optimize.brentq(lambda s: fredholm_cdf(s, nodes=120) - prob, -9.0, 8.0, xtol=1e-12)


def main():
    probs = np.r_[0.001, 0.002, 0.005, np.round(np.arange(0.01, 0.995, 0.01), 2), 0.995, 0.998, 0.999]
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "pcarank" / "data" / "tw1_quantiles.txt"
    lines = [
        "# Order-1 Tracy-Widom distribution: probability F_1(s), threshold s.",
        "# Computed as det(I - K) with K(x,y) = Ai((x+y)/2)/2 on L^2(s, inf), 120-node Gauss-Legendre.",
        f"# version: {VERSION}",
    ]
    for pr in probs:
        lines.append(f"{pr:.3f} {quantile(pr):.10f}")
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(probs)} rows to {out}")


if __name__ == "__main__":
    main()
