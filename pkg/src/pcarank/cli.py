"""
Command-line interface.

    pcarank test  DATA [--method csv] [--k K] (--sigma2 S | --noise-est NAME) [--scree]
    pcarank rank  DATA [--method csv] [--rule strong] (--sigma2 S | --noise-est NAME)
    pcarank ci    DATA [--k 1] [--level 0.95] (--sigma2 S | --noise-est NAME)
    pcarank noise DATA [--variant median] [--folds 20] [--c 0.6667] [--kappa K]
    pcarank simulate --suite {calibration,coverage,rank,power} [design flags] --out-dir DIR

``DATA`` is a delimited numeric text file, or use ``--exam`` for the bundled
exam-score matrix.  Reports are JSON on stdout (or ``--out``).  The default
seed comes from ``PCARANK_SEED`` (0 if unset).

Exit codes: 0 success, 2 usage, 3 input, 4 numerical failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path


from . import __version__
from .errors import (DegenerateError, InputError, NumericalError, ParameterError,
                     UnsupportedError)
from .exact import METHODS, confidence_interval, csv_test, sequential_tests
from .icsv import ISConfig, icsv_statistic
from .io import AnalysisReport, fingerprint, load_exam_scores, read_matrix
from .noise import DEFAULT_C, DEFAULT_FOLDS, estimate_noise
from .simlab import Design, run_coverage, run_null_calibration, run_rank_experiment, write_table
from .spectra import ObservedMatrix, svd_full
from .stopping import DEPENDENCE_CAVEAT, RULES, decide

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3, 4

NOISE_NAMES = {"median": "median", "simple": "simple", "cv": "lambda", "cv-df": "lambda_df",
               "cv-dfc": "lambda_df_c"}
SUITES = ("calibration", "coverage", "rank", "power")


class UsageError(Exception):
    pass


def default_seed():
    raw = os.environ.get("PCARANK_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"PCARANK_SEED must be an integer, got {raw!r}") from None


# --------------------------------------------------------------------------- parsing

def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_data(p):
    p.add_argument("data", nargs="?", help="matrix file (rows = observations)")
    p.add_argument("--exam", action="store_true", help="use the bundled exam-score matrix")
    p.add_argument("--header", action="store_true", help="first data line is a header")
    p.add_argument("--delimiter", choices=("comma", "tab", "space"),
                   help="field separator (auto-detected by default)")
    p.add_argument("--center", action="store_true", help="subtract column means first")
    p.add_argument("--seed", type=int, default=None, help="random seed (default $PCARANK_SEED or 0)")
    p.add_argument("--out", help="write the report here instead of stdout")


def _add_sigma(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--sigma2", type=float, help="known noise variance")
    g.add_argument("--noise-est", choices=sorted(NOISE_NAMES), help="estimate the noise variance")
    p.add_argument("--kappa", type=int, help="rank used by --noise-est simple")
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS, help="CV folds for cv-* estimators")
    p.add_argument("--c", type=float, default=DEFAULT_C, help="df shrinkage for cv-dfc")


def build_parser():
    parser = argparse.ArgumentParser(prog="pcarank", description="Rank inference for PCA.")
    parser.add_argument("--version", action="version", version=f"pcarank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="sequential step tests")
    _add_data(t)
    _add_sigma(t)
    t.add_argument("--method", choices=METHODS, default="csv")
    t.add_argument("--k", type=int, help="single step to test (default: all)")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--samples", type=int, default=ISConfig.sample_count,
                   help="importance samples for --method icsv")
    t.add_argument("--scree", action="store_true", help="only print the singular values")

    r = sub.add_parser("rank", help="estimate the rank")
    _add_data(r)
    _add_sigma(r)
    r.add_argument("--method", choices=METHODS, default="csv")
    r.add_argument("--rule", choices=RULES, default="strong")
    r.add_argument("--alpha", type=float, default=0.05)
    r.add_argument("--samples", type=int, default=ISConfig.sample_count)

    c = sub.add_parser("ci", help="confidence interval for <U_k V_k^T, B>")
    _add_data(c)
    _add_sigma(c)
    c.add_argument("--k", type=int, default=1)
    c.add_argument("--level", type=float, default=0.95)

    n = sub.add_parser("noise", help="estimate the noise variance")
    _add_data(n)
    n.add_argument("--variant", choices=sorted(NOISE_NAMES), default="median")
    n.add_argument("--kappa", type=int)
    n.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    n.add_argument("--c", type=float, default=DEFAULT_C)
    n.add_argument("--lambda", dest="lam", type=float, help="fixed lambda (skips CV)")

    s = sub.add_parser("simulate", help="run a simulation suite")
    s.add_argument("--suite", choices=SUITES, required=True)
    s.add_argument("--design", help="JSON file with design keys (N, p, rank, m, ...)")
    s.add_argument("--N", type=int, default=50)
    s.add_argument("--p", type=int, default=10)
    s.add_argument("--rank", type=_int_list, default=[0], help="comma-separated ranks")
    s.add_argument("--m", type=_float_list, default=[1.5], help="comma-separated magnitudes")
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--noise-kind", choices=("gaussian", "heavy_tail", "right_skew"),
                   default="gaussian")
    s.add_argument("--sigma-mode", default="known",
                   choices=["known"] + sorted(k for k in NOISE_NAMES if k != "simple"),
                   help="known sigma2 or an estimator")
    s.add_argument("--method", type=lambda v: v.split(","), default=["csv"],
                   help="comma-separated test methods")
    s.add_argument("--steps", type=_int_list, help="steps to compute (default all)")
    s.add_argument("--control", action="store_true",
                   help="also run the sequential global-null test (calibration)")
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--rule", choices=RULES, default="strong")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--samples", type=int, default=ISConfig.sample_count)
    s.add_argument("--out-dir", required=True)
    return parser


# --------------------------------------------------------------------------- helpers

def _load(args):
    if bool(args.data) == bool(args.exam):
        raise UsageError("give exactly one of a matrix file or --exam")
    if args.exam:
        Y, source = load_exam_scores(), "builtin:exam"
    else:
        Y, source = read_matrix(args.data, args.delimiter, args.header), str(args.data)
    if args.center:
        Y = Y - Y.mean(axis=0)
    obs = ObservedMatrix(Y)
    desc = {"source": source, "shape": list(Y.shape), "transposed": obs.transposed,
            "centered": bool(args.center), "fingerprint": fingerprint(Y)}
    return obs, desc


def _noise(args, obs, seed):
    """Resolve sigma2 from the flags; returns (sigma2 or None, noise report list)."""
    if args.sigma2 is not None:
        if not args.sigma2 > 0:
            raise UsageError("--sigma2 must be positive")
        return args.sigma2, []
    if args.noise_est is None:
        return None, []
    variant = NOISE_NAMES[args.noise_est]
    if variant == "simple" and args.kappa is None:
        raise UsageError("--noise-est simple needs --kappa")
    est = estimate_noise(obs, variant, kappa=args.kappa, c=args.c, folds=args.folds, rng=seed)
    return est.sigma2, [est.to_dict()]


def _need_sigma(method, sigma2):
    if sigma2 is None and method != "muirhead":
        raise UsageError(f"--method {method} needs --sigma2 or --noise-est")


def _config(args):
    skip = {"out", "func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _emit(report, args):
    text = report.to_json() + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------- commands

def cmd_test(args, seed):
    obs, desc = _load(args)
    spec = svd_full(obs)
    if args.scree:
        for k, d in enumerate(spec.values, start=1):
            print(f"{k}\t{d:.10g}")
        return None
    sigma2, noise = _noise(args, obs, seed)
    _need_sigma(args.method, sigma2)
    icfg = ISConfig(sample_count=args.samples, seed=seed,
                    max_batches=max(40, -(-args.samples // ISConfig.batch_size)))
    if args.k is None:
        outcomes = sequential_tests(spec, sigma2, args.method, icsv_config=icfg, alpha=args.alpha)
    elif args.method == "csv":
        outcomes = [csv_test(spec, args.k, sigma2)]
    elif args.method == "icsv":
        outcomes = [icsv_statistic(spec, args.k, sigma2, icfg)]
    else:
        outcomes = [o for o in sequential_tests(spec, sigma2, args.method, alpha=args.alpha)
                    if o.k == args.k]
        if not outcomes:
            raise ParameterError(f"step k={args.k} must lie in [1, {spec.p - 1}]")
    caveats = []
    if any(o.diagnostics.get("degenerate") for o in outcomes):
        caveats.append("some steps have tied singular values; their p-values are limits")
    return AnalysisReport("test", desc, _config(args), __version__, seed,
                          spectrum=spec.values.tolist(), tests=[o.to_dict() for o in outcomes],
                          noise=noise, caveats=caveats)


def cmd_rank(args, seed):
    obs, desc = _load(args)
    spec = svd_full(obs)
    sigma2, noise = _noise(args, obs, seed)
    _need_sigma(args.method, sigma2)
    icfg = ISConfig(sample_count=args.samples, seed=seed,
                    max_batches=max(40, -(-args.samples // ISConfig.batch_size)))
    outcomes = sequential_tests(spec, sigma2, args.method, icsv_config=icfg, alpha=args.alpha)
    decision = decide([o.p_value for o in outcomes], args.rule, args.alpha)
    decision.method, decision.sigma2 = args.method, sigma2
    return AnalysisReport("rank", desc, _config(args), __version__, seed,
                          spectrum=spec.values.tolist(), tests=[o.to_dict() for o in outcomes],
                          rank=decision.to_dict(), noise=noise, caveats=[DEPENDENCE_CAVEAT])


def cmd_ci(args, seed):
    obs, desc = _load(args)
    spec = svd_full(obs)
    sigma2, noise = _noise(args, obs, seed)
    if sigma2 is None:
        raise UsageError("ci needs --sigma2 or --noise-est")
    ci = confidence_interval(spec, args.k, sigma2, args.level)
    return AnalysisReport("ci", desc, _config(args), __version__, seed,
                          spectrum=spec.values.tolist(), noise=noise, intervals=[ci.to_dict()])


def cmd_noise(args, seed):
    obs, desc = _load(args)
    variant = NOISE_NAMES[args.variant]
    if variant == "simple" and args.kappa is None:
        raise UsageError("--variant simple needs --kappa")
    est = estimate_noise(obs, variant, kappa=args.kappa, lam=args.lam, c=args.c,
                         folds=args.folds, rng=seed)
    return AnalysisReport("noise", desc, _config(args), __version__, seed,
                          spectrum=svd_full(obs).values.tolist(), noise=[est.to_dict()])


def _designs(args):
    base = {}
    if args.design:
        try:
            base = json.loads(Path(args.design).read_text())
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read design file {args.design}: {exc}") from None
    get = lambda key, default: base.get(key, default)
    ranks = get("rank", args.rank)
    ms = get("m", args.m)
    ranks = ranks if isinstance(ranks, list) else [ranks]
    ms = ms if isinstance(ms, list) else [ms]
    sigma_mode = get("sigma", args.sigma_mode)
    sigma_mode = NOISE_NAMES.get(sigma_mode, sigma_mode)
    out = []
    for rank in ranks:
        for m in (ms if rank > 0 else ms[:1]):
            out.append(Design.make(get("N", args.N), get("p", args.p), rank, m,
                                   get("sigma2", args.sigma2), get("noise", args.noise_kind),
                                   sigma_mode))
    return out


def cmd_simulate(args, seed):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    designs = _designs(args)
    for m in args.method:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    icfg = ISConfig(sample_count=args.samples, seed=seed,
                    max_batches=max(40, -(-args.samples // ISConfig.batch_size)))
    summary, files = [], []
    for d in designs:
        tag = f"r{d.signal.rank}_m{d.signal.m:g}"
        if args.suite in ("calibration", "power"):
            for method in args.method:
                res = run_null_calibration(d, method, args.reps, seed, args.steps,
                                           control=args.control and args.suite == "calibration",
                                           icsv_config=icfg)
                path = out_dir / f"{args.suite}_{method}_{tag}.tsv"
                res.write(path)
                files.append(path.name)
                ks = res.ks()
                for k in res.steps:
                    D, pv = ks.get(k, (float("nan"), float("nan")))
                    summary.append((method, d.signal.rank, d.signal.m, k, int(k > d.signal.rank),
                                    f"{res.rejection_rate(k, args.alpha):.4f}", f"{D:.4f}",
                                    f"{pv:.4g}"))
            header = ["method", "rank", "m", "step", "null", "reject_rate", "ks_distance",
                      "ks_pvalue"]
        elif args.suite == "coverage":
            res = run_coverage(d, args.level, args.reps, seed)
            path = out_dir / f"coverage_{tag}.tsv"
            res.write(path)
            files.append(path.name)
            for k, v in res.coverage().items():
                summary.append((d.signal.rank, d.signal.m, k, f"{v:.4f}", res.failures))
            header = ["rank", "m", "step", "coverage", "failures"]
        else:
            for method in args.method:
                res = run_rank_experiment(d, args.rule, args.alpha, args.reps, seed, method,
                                          icsv_config=icfg)
                path = out_dir / f"rank_{method}_{tag}.tsv"
                res.write(path)
                files.append(path.name)
                s = res.summary()
                summary.append((method, d.signal.rank, d.signal.m, f"{s['rate_correct']:.4f}",
                                f"{s['mse']:.4f}", f"{s['overestimation']:.4f}"))
            header = ["method", "rank", "m", "rate_correct", "mse", "overestimation"]
    meta = {"suite": args.suite, "designs": [d.to_dict() for d in designs], "reps": args.reps,
            "seed": seed, "files": files, "version": __version__}
    write_table(out_dir / f"{args.suite}_summary.tsv", header, summary, meta)
    print(f"wrote {len(files) + 1} tables to {out_dir}", file=sys.stderr)
    return None


COMMANDS = {"test": cmd_test, "rank": cmd_rank, "ci": cmd_ci, "noise": cmd_noise,
            "simulate": cmd_simulate}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        seed = args.seed if args.seed is not None else default_seed()
        args.seed = seed  # echo the effective seed in the report config
        report = COMMANDS[args.command](args, seed)
        if report is not None:
            _emit(report, args)
        return EXIT_OK
    except (UsageError, ParameterError, UnsupportedError) as exc:
        print(f"pcarank: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"pcarank: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, DegenerateError) as exc:
        print(f"pcarank: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
