########################################################################
## IMPORTS
########################################################################
import argparse
import logging
import sys

from . import Logs, __version__
from .Config.ExperimentConfig import EXPERIMENTS, SWEEP_AXES, load_config
from .Errors import EXIT_CHECK_FAILED, EXIT_PASS, IO_FAILURES, NUMERIC_FAILURES, QOperatorError, exit_code_for
from .Experiments import run, sweep
from .Reports import validate_report

logger = logging.getLogger(__name__)


########################################################################
## ARGUMENTS
########################################################################
def _csv_floats(text):
    try:
        return [float(v) for v in text.strip("[]").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated numbers, got %r" % text)


# (flag, config field, type)
VALUE_FLAGS = (
    ("--N", "N", int),
    ("--lambda", "lam", float),
    ("--u", "u", _csv_floats),
    ("--xi", "xi", float),
    ("--xi2", "xi2", float),
    ("--t", "t", _csv_floats),
    ("--v", "v", _csv_floats),
    ("--tau", "tau", _csv_floats),
    ("--hbar", "hbar", float),
    ("--mu", "mu", float),
    ("--panels", "panels", int),
    ("--order", "order", int),
    ("--R", "R", float),
    ("--wall-guard", "wall_guard", float),
    ("--margin", "margin", float),
    ("--degree", "degree", int),
    ("--tol", "tol", float),
    ("--h", "h", float),
    ("--fd-order", "fd_order", int),
    ("--samples", "samples", int),
    ("--json", "json", str),
    ("--csv", "csv", str),
    ("--plot", "plot", str),
    ("--threads", "threads", int),
    ("--seed", "seed", int),
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cmqop",
        description="Numerical verification of the Q-operator of the hyperbolic Calogero-Moser system.")
    parser.add_argument("target", choices=EXPERIMENTS + ("sweep",),
                        help="experiment to run, or 'sweep' followed by an experiment")
    parser.add_argument("experiment", nargs="?", choices=EXPERIMENTS, help="experiment swept by 'sweep'")
    parser.add_argument("--config", action="append", default=[], metavar="FILE",
                        help="JSON or 'key = value' config file; may repeat")
    for flag, dest, kind in VALUE_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=None)
    parser.add_argument("--refine", dest="refine", action=argparse.BooleanOptionalAction, default=None,
                        help="repeat quadrature experiments on the refined grid")
    logs = parser.add_mutually_exclusive_group()
    logs.add_argument("--show-logs", dest="show_logs", action="store_const", const=True, default=None)
    logs.add_argument("--hide-logs", dest="show_logs", action="store_const", const=False)
    parser.add_argument("--verbose", action="store_const", const=True, default=None)
    parser.add_argument("--axis", choices=SWEEP_AXES, help="swept parameter (sweep only)")
    parser.add_argument("--values", type=_csv_floats, help="swept values (sweep only)")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    return parser


def overrides_from(args):
    names = [dest for _, dest, _ in VALUE_FLAGS] + ["refine", "show_logs", "verbose"]
    return {name: getattr(args, name) for name in names if getattr(args, name) is not None}


########################################################################
## OUTPUT
########################################################################
def format_sweep(rows):
    lines = ["%-16s %12s  %-34s %12s  %s" % ("axis", "value", "check", "residual", "result")]
    for row in rows:
        result = row.error if row.error else ("pass" if row.passed else "FAIL")
        lines.append("%-16s %12.5g  %-34s %12.4e  %s" % (row.axis, row.value, row.check, row.residual, result))
    return "\n".join(lines)


########################################################################
## MAIN
########################################################################
def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.target == "sweep":
        if args.experiment is None or args.axis is None or args.values is None:
            parser.error("sweep needs an experiment, --axis and --values")
        experiment = args.experiment
    else:
        if args.experiment is not None:
            parser.error("unexpected second experiment '%s'" % args.experiment)
        experiment = args.target

    try:
        config = load_config(experiment, files=args.config, overrides=overrides_from(args))
        Logs.show_logs(config.show_logs or config.verbose, config.verbose)

        if args.target == "sweep":
            rows = sweep(config, args.axis, args.values)
            print(format_sweep(rows))
            return EXIT_PASS if all(row.passed for row in rows) else EXIT_CHECK_FAILED

        report = run(config)
        print(report.format_table())
        if config.json:
            validate_report(report)
            report.write_json(config.json)
        if config.csv:
            report.write_csv(config.csv)
        return EXIT_PASS if report.passed else EXIT_CHECK_FAILED
    except QOperatorError as error:
        print(str(error), file=sys.stderr)
        return exit_code_for(error)
    except IO_FAILURES as error:
        print("Error: I/O failure: %s" % error, file=sys.stderr)
        return exit_code_for(error)
    except NUMERIC_FAILURES as error:
        print("Error: numeric failure (%s): %s" % (type(error).__name__, error), file=sys.stderr)
        return exit_code_for(error)


if __name__ == "__main__":
    sys.exit(main())
