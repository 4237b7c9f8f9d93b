"""
Are the step p-values uniform when they should be?

Runs a small rank-1 experiment at N=50, p=10 and prints, per step, the mean
p-value and KS distance for the CSV test, the naive sequential global-null
test and the Tracy-Widom pseudorank test, then the coverage of the exact
intervals.  Increase REPS for sharper numbers.

    python demos/null_calibration.py
"""

from pcarank.simlab import Design, run_coverage, run_null_calibration

REPS = 300


def main():
    for m in (1.5, 3.0):
        design = Design.make(50, 10, rank=1, m=m)
        print(f"rank 1, m = {m}, {REPS} replications")
        csv = run_null_calibration(design, "csv", REPS, seed=1, steps=[1, 2, 3, 4], control=True)
        tw = run_null_calibration(design, "pseudorank", REPS, seed=1, steps=[1, 2, 3, 4])
        ks, ks_ctrl, ks_tw = csv.ks(), csv.ks(control=True), tw.ks()
        print("  step   CSV mean/KS    naive-KR mean/KS   pseudorank mean/KS")
        for k in (2, 3, 4):
            print(f"  {k:4d}   {csv.column(k).mean():.3f}/{ks[k][0]:.3f}"
                  f"    {csv.column(k, True).mean():.3f}/{ks_ctrl[k][0]:.3f}"
                  f"        {tw.column(k).mean():.3f}/{ks_tw[k][0]:.3f}")
        cov = run_coverage(design, 0.95, REPS, seed=2).coverage()
        print("  95% interval coverage:", {k: round(v, 3) for k, v in cov.items()})
        print()
    print("uniform p-values have mean 0.5; the naive sequential test and the pseudorank")
    print("test drift towards 1 at later steps.  At m = 1.5 the signal is only just")
    print("above the detection threshold, which also disturbs the CSV at step 2.")


if __name__ == "__main__":
    main()
