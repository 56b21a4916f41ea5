"""Command line entry points.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, metrics, rip
from .rng import substream
from .sensing import make_gaussian_ensemble


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="opsa",
                     description="Robust low-rank matrix recovery toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    solve = sub.add_parser("solve", help="run one solve and write a trace CSV")
    solve.add_argument("--m", type=int, default=100)
    solve.add_argument("--n", type=int, default=100)
    solve.add_argument("--r", type=int, default=5)
    solve.add_argument("--d", type=int, default=10)
    solve.add_argument("--kappa", type=float, default=20.0)
    solve.add_argument("--outlier-fraction", type=float, default=0.1)
    solve.add_argument("--amplitude", type=float, default=10.0)
    solve.add_argument("--p", default="8nr",
                       help="measurement count, or '8nr' for 8*n*r")
    solve.add_argument("--normalize", action="store_true",
                       help="rescale the planted spectrum so sigma_r = 1")
    solve.add_argument("--lambda", dest="lam", type=float, default=2.0)
    solve.add_argument("--method", default="opsa",
                       choices=["opsa", "scaledsm", "vanilla"])
    solve.add_argument("--step-policy", default="polyak",
                       choices=["polyak", "geometric"])
    solve.add_argument("--eta0", type=float, default=0.1)
    solve.add_argument("--q", type=float, default=0.97)
    solve.add_argument("--init", default="spectral",
                       choices=["spectral", "factors"])
    solve.add_argument("--truncation-quantile", type=float, default=None)
    solve.add_argument("--init-split", default="ridge",
                       choices=["ridge", "balanced"])
    solve.add_argument("--init-sv-threshold", type=float, default=1.25,
                       help="zero init directions below this multiple of the "
                            "noise floor; negative disables")
    solve.add_argument("--regauge-every", type=int, default=100)
    solve.add_argument("--pinv-cutoff", type=float, default=1e-12)
    solve.add_argument("--max-iters", type=int, default=2000)
    solve.add_argument("--rel-err-stop", type=float, default=1e-12)
    solve.add_argument("--dist-every", type=int, default=0)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--wall-ms", action="store_true",
                       help="include wall-clock column (breaks rerun identity)")
    solve.add_argument("--out", default="trace.csv")

    exp = sub.add_parser("experiment", help="run a JSON-configured sweep")
    exp.add_argument("--config", required=True)

    probe = sub.add_parser("rip-probe",
                           help="sample measurement l1/Frobenius ratios")
    probe.add_argument("--m", type=int, required=True)
    probe.add_argument("--n", type=int, required=True)
    probe.add_argument("--p", type=int, required=True)
    probe.add_argument("--two-d", type=int, required=True)
    probe.add_argument("--trials", type=int, default=500)
    probe.add_argument("--outlier-fraction", type=float, default=0.0)
    probe.add_argument("--seed", type=int, default=0)
    probe.add_argument("--out", default=None, help="CSV path (default stdout)")

    theory = sub.add_parser("theory-check",
                            help="run the numerical inequality suite")
    theory.add_argument("--samples", type=int, default=1000)
    theory.add_argument("--seed", type=int, default=0)
    theory.add_argument("--csv", default=None, help="also write a CSV report")

    rate = sub.add_parser("rate", help="evaluate the contraction-rate formula")
    rate.add_argument("--chi", type=float, required=True)
    rate.add_argument("--epsilon", type=float, required=True)
    rate.add_argument("--lambda", dest="lam", type=float, required=True)
    rate.add_argument("--opnorm", type=float, required=True)
    return parser


def _cmd_solve(args) -> int:
    p = 8 * args.n * args.r if args.p == "8nr" else int(args.p)
    cfg = harness.ExperimentConfig(
        m=args.m, n=args.n, r=args.r, d_values=(args.d,),
        kappa_values=(args.kappa,), lambda_values=(args.lam,),
        fraction_values=(args.outlier_fraction,), methods=(args.method,),
        seeds=(args.seed,), amplitude=args.amplitude, p_rule=p,
        normalize=args.normalize, step_policy=args.step_policy,
        eta0=args.eta0, q=args.q, init=args.init,
        truncation_quantile=args.truncation_quantile,
        init_split=args.init_split,
        init_sv_threshold=(None if args.init_sv_threshold < 0
                           else args.init_sv_threshold),
        regauge_every=args.regauge_every, pinv_cutoff=args.pinv_cutoff,
        max_iters=args.max_iters, rel_err_stop=args.rel_err_stop,
        dist_every=args.dist_every,
    )
    trace = harness.run_cell(cfg, args.d, args.kappa, args.lam,
                             args.outlier_fraction, args.method, args.seed)
    Path(args.out).write_text(harness.trace_csv(trace,
                                                include_wall_ms=args.wall_ms))
    last = trace.records[-1]
    print(f"{trace.reason} after {last.t} iterations; "
          f"rel_error={last.rel_error:.3e} -> {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    path = Path(args.config)
    if not path.exists():
        print(f"opsa experiment: config file not found: {path}",
              file=sys.stderr)
        return 2
    cfg = harness.parse_config(json.loads(path.read_text()))
    manifest = harness.run_experiment(cfg)
    failed = [c for c in manifest["cells"] if c["status"] != "ok"]
    print(f"{len(manifest['cells'])} cells -> {cfg.directory} "
          f"({len(failed)} failed)")
    return 2 if failed else 0


def _cmd_rip_probe(args) -> int:
    ens = make_gaussian_ensemble(args.m, args.n, args.p, args.seed)
    ratios = rip.mixed_rip_trials(ens, args.two_d, args.trials, args.seed)
    est = rip.RipEstimate(delta_minus=float(ratios.min()),
                          delta_plus=float(ratios.max()), delta_zero=None,
                          trials=args.trials, rank_tested=args.two_d,
                          seed=args.seed)
    split_rows = None
    if args.outlier_fraction > 0:
        k = int(np.rint(args.outlier_fraction * args.p))
        support = np.sort(substream(args.seed, 0xC0).choice(
            args.p, size=k, replace=False))
        split_rows = rip.outlier_bound_trials(ens, support, args.two_d,
                                              args.trials, args.seed)
    csv_text = rip.rip_trials_csv(ratios, split_rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    summary = (f"trials={args.trials} rank={args.two_d} "
               f"delta_minus={est.delta_minus:.6f} "
               f"delta_plus={est.delta_plus:.6f}")
    if split_rows is not None:
        summary += f" delta_zero={float(split_rows[:, 0].min()):.6f}"
    print(summary, file=sys.stderr if not args.out else sys.stdout)
    return 0


def _cmd_theory_check(args) -> int:
    results = metrics.theory_checks(args.samples, args.seed)
    print(metrics.format_check_report(results))
    if args.csv:
        Path(args.csv).write_text(metrics.check_report_csv(results))
    return 0 if all(res.ok for res in results) else 2


def _cmd_rate(args) -> int:
    inp = metrics.rate_inputs_from_opnorm(args.chi, args.epsilon, args.lam,
                                          args.opnorm)
    rho = metrics.contraction_rate(inp)
    print(f"rho={rho:.10f}")
    print(f"simplified={metrics.simplified_rate(args.chi):.10f}")
    print(f"one_minus_rho_times_chi_sq={(1 - rho) * args.chi ** 2:.6f}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "solve": _cmd_solve,
        "experiment": _cmd_experiment,
        "rip-probe": _cmd_rip_probe,
        "theory-check": _cmd_theory_check,
        "rate": _cmd_rate,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"opsa {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
