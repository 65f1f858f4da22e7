"""``offgrid`` command line: certificate reports, single trials, Monte Carlo studies.

Exit codes: 0 on success, 2 when a precondition is refused (separation,
infeasible kernel regularity, malformed config), 1 on internal error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .certificates import (CertificateInfeasibleError, ConditioningError,
                           SeparationError)
from .experiments import (ConfigError, ExperimentConfig, TrialResult,
                          build_instance, run_certificate_report, run_study,
                          run_trial, write_study_csvs)

PRECONDITION_ERRORS = (SeparationError, CertificateInfeasibleError,
                       ConditioningError, ConfigError, FileNotFoundError)


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _cmd_certify(args) -> int:
    cfg = _load(args)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    rows, report = run_certificate_report(cfg, outdir=outdir,
                                          seed=int(cfg.study["seed"]))
    if not args.no_figures:
        from .figures import certificate_figure
        certificate_figure(report, outdir)
    for name, val, step in rows:
        print(f"{name:>18s} = {val:.6g}   (grid step {step:g})")
    print(f"verification: {'PASS' if report.all_pass else 'FAIL'} "
          f"({len(report.rows)} checks)")
    return 0


def _cmd_trial(args) -> int:
    cfg = _load(args)
    inst = build_instance(cfg)
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, f"trace_{args.rep:04d}.csv")
    res = run_trial(inst, args.rep, trace_path=trace_path)
    path = os.path.join(args.out, f"trial_{args.rep:04d}.csv")
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TrialResult.HEADER)
        w.writerow(res.row())
    print(",".join(TrialResult.HEADER))
    print(",".join(str(v) for v in res.row()))
    return 0


def _cmd_study(args) -> int:
    cfg = _load(args)

    def progress(sweep, value, summary):
        print(f"[{sweep}={value}] median R^2 = {summary['median_Rhat2']:.6g}  "
              f"event_ok = {summary['frac_event_ok']:.2f}", flush=True)

    study = run_study(cfg, threads=args.threads, progress=progress)
    write_study_csvs(study, args.out)
    if not args.no_figures:
        from .figures import study_figure
        study_figure(study, args.out)
    if study.slope_loglog is not None:
        print(f"fitted log-log slope: {study.slope_loglog:.4f}")
    print(f"wrote summary.csv, plotdata.csv, meta.csv, trials.csv to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="offgrid",
        description="Off-the-grid recovery of sparse mixtures across multiple signals")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rep=False):
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override study seed")
        p.add_argument("--threads", type=int, default=1,
                       help="replicate worker processes")
        p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")
        if rep:
            p.add_argument("--rep", type=int, required=True,
                           help="replicate index")

    common(sub.add_parser("certify", help="kernel/certificate feasibility report"))
    common(sub.add_parser("trial", help="run one replicate"), rep=True)
    common(sub.add_parser("study", help="Monte Carlo sweep"))

    args = parser.parse_args(argv)
    handlers = {"certify": _cmd_certify, "trial": _cmd_trial, "study": _cmd_study}
    try:
        return handlers[args.command](args)
    except PRECONDITION_ERRORS as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
