import argparse
import logging
import sys

import chronoclock.clockExceptions as ex
from chronoclock.harness import PDX_CHECK, RESOLUTION_SCAN, ExperimentConfig, plot_data, run_experiment
from chronoclock.version import __title__, __version__

log = logging.getLogger(__name__)


def _overrides(suppress):
    """Config overrides, accepted before or after the subcommand."""
    default = argparse.SUPPRESS if suppress else None
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--out", dest="out", default=default, help="output directory (overrides output_dir)")
    shared.add_argument("--seed", dest="seed", type=int, default=default, help="seed for Monte-Carlo checks")
    shared.add_argument("--threads", dest="threads", type=int, default=default,
                        help="worker threads for clock channels")
    return shared


def build_parser():
    parser = argparse.ArgumentParser(prog=__title__, description="Idealised-clock time-of-arrival and dwell-time experiments",
                                     parents=[_overrides(False)])
    parser.add_argument("--version", action="version", version="{} {}".format(__title__, __version__))
    parser.add_argument("--debug", action="store_true", help="log every stage")
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    commands = parser.add_subparsers(dest="command")
    commands.required = True
    overrides = _overrides(True)

    run = commands.add_parser("run", parents=[overrides], help="run the experiment described by a YAML config")
    run.add_argument("config", help="path to the YAML config")

    commands.add_parser("pdx-check", parents=[overrides], help="verify the path decomposition identities")

    scan = commands.add_parser("resolution-scan", parents=[overrides],
                               help="clock resolution law and coarse-graining check")
    scan.add_argument("--lambda", dest="lam", type=float, default=1.0, help="coupling strength")
    scan.add_argument("--sigma-eps", dest="sigma_eps", type=float, default=10.0, help="clock energy width")

    plot = commands.add_parser("plot-data", help="write gnuplot columns from a finished run")
    plot.add_argument("directory", help="directory holding pointer.csv and predicted.csv")
    return parser


def load_config(args):
    if args.command == "run":
        mapping = None
        config = ExperimentConfig.from_yaml(args.config)
    elif args.command == "pdx-check":
        mapping = {"experiment": PDX_CHECK}
    else:
        mapping = {"experiment": RESOLUTION_SCAN, "lambda": args.lam, "clock": {"sigma_eps": args.sigma_eps}}
    if mapping is not None:
        config = ExperimentConfig.from_dict(mapping)
    if args.out:
        config.output_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    config.validate()
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.debug else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")

    try:
        if args.command == "plot-data":
            print(plot_data(args.directory))
            return 0
        config = load_config(args)
        report = run_experiment(config, debug=args.debug)
    except ex.ChronoClockException as e:
        log.error("{} (code {})".format(e, e.code))
        return 1

    for name, passed in sorted(report.passed.items()):
        print("{:<20} {}".format(name, "pass" if passed else "FAIL"))
    print("{:<20} {:.3e}".format("l2_relative", report.l2_relative))
    print("artifacts in {}".format(config.output_dir))
    return 0 if report.ok else 2


if __name__ == "__main__":
    sys.exit(main())
