"""Command-line interface.

    mpqc run <spec.json | bundled name> [--out DIR] [--workers K] [--strict] [--no-plots]
    mpqc compare <spec.json | bundled name> [--out DIR] [--workers K] [--strict]
    mpqc check-grad [--trials 50] [--seed 0]
    mpqc validate <spec.json | bundled name>

The output root defaults to ``$MPQC_OUTPUT_ROOT`` or ``./results``.

Exit codes: 0 success, 1 invalid config or usage, 2 solver failure in at
least one run, 3 acceptance check failed (``--strict`` only; ``check-grad``
always uses 3 for an error above threshold).
"""

import argparse
import sys

from .errors import ConfigError
from .experiments.config import bundled_names, read_config
from .experiments.gradcheck import check_gradients
from .experiments.runner import compare_qoc_vs_mpqc, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; map those onto the config/usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser():
    p = _Parser(prog="mpqc", description="Model predictive quantum control experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_text in (("run", "run every grid point of an experiment"),
                            ("compare", "basic MPQC over the L grid against direct QOC")):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("spec", help="config file, or a bundled name: " + ", ".join(bundled_names()))
        s.add_argument("--out", default=None, help="output root (overrides $MPQC_OUTPUT_ROOT)")
        s.add_argument("--workers", type=_positive_int, default=1, help="worker processes")
        s.add_argument("--strict", action="store_true",
                       help="exit 3 when an acceptance check fails")
        if name == "run":
            s.add_argument("--no-plots", action="store_true", help="skip SVG plots")

    g = sub.add_parser("check-grad", help="adjoint gradient vs finite differences")
    g.add_argument("--trials", type=_positive_int, default=50)
    g.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("validate", help="parse and validate a config without running it")
    v.add_argument("spec")
    return p


def _fmt(x, spec="{:.6f}"):
    return "-" if x is None else spec.format(x)


def _report(result):
    print(f"experiment {result.spec.name}: {len(result.runs)} runs -> {result.out_dir}")
    print("run_id,status,final_fidelity,total_cost,wall_time,satisfaction_rate")
    for r in result.runs:
        print(f"{r.run_id},{r.status},{_fmt(r.final_fidelity, '{:.9f}')},"
              f"{_fmt(r.total_cost, '{:.6g}')},{r.wall_time:.3f},{_fmt(r.satisfaction_rate, '{:.3f}')}")
        if r.error:
            print(f"  error: {r.error}", file=sys.stderr)
    for c in result.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")


def _exit_code(result, strict):
    if result.failed_runs:
        return EXIT_SOLVER
    if strict and not result.passed:
        return EXIT_ACCEPTANCE
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)

    if args.command == "check-grad":
        report = check_gradients(args.seed, args.trials)
        print("\n".join(report.lines()))
        return EXIT_OK if report.passed else EXIT_ACCEPTANCE

    try:
        spec = read_config(args.spec)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(f"{spec.name}: valid ({len(spec.schemes)} schemes, "
              f"{len(spec.sweep['targets'])} targets, L grid {spec.sweep['L']}, "
              f"{len(spec.sweep['eps'])} eps values)")
        return EXIT_OK

    try:
        if args.command == "compare":
            rows, result = compare_qoc_vs_mpqc(spec, args.out, args.workers)
            _report(result)
            print("target,label,L,mpqc_cost,mpqc_time,qoc_cost,qoc_time")
            for row in rows:
                print(",".join(str(row[c]) for c in ("target", "label", "L", "mpqc_cost",
                                                     "mpqc_time", "qoc_cost", "qoc_time")))
        else:
            result = run_experiment(spec, args.out, args.workers, plots=not args.no_plots)
            _report(result)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return _exit_code(result, args.strict)


if __name__ == "__main__":
    sys.exit(main())
