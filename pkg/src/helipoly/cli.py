"""Command-line entry point: ``helipoly run|list|validate-config``."""

import argparse
import sys

from . import experiments as ex
from .errors import HelipolyError
from .io import dumps_json
from .polygon import read_config


def _error(exc, code=2):
    sys.stderr.write(dumps_json({"error": type(exc).__name__, "message": str(exc)}))
    return code


def cmd_list(args):
    for eid, desc, target in ex.list_experiments():
        print(f"{eid:18s} {target:14s} {desc}")
    return 0


def cmd_run(args):
    overrides = {}
    name = args.experiment
    if args.config:
        cfg_name, overrides = ex.config_overrides(args.config)
        name = name or cfg_name
    if not name:
        raise HelipolyError("no experiment id given (argument or [experiment] id in --config)")
    out = args.out or f"runs/{name}"
    ex.run(name, out, full=args.full, jobs=args.jobs, overrides=overrides)
    print(out)
    return 0


def cmd_validate(args):
    report = {"config": args.config}
    name, overrides = ex.config_overrides(args.config)
    if name is not None:
        exp = ex.get_experiment(name)
        report["experiment"] = exp.id
        report["params"] = exp.params(False, overrides)
    try:
        spec, solver, _ = read_config(args.config)
    except ValueError:
        if name is None:
            raise
    else:
        report["polygon"] = spec.describe()
        report["solver"] = solver
    sys.stdout.write(dumps_json(report))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="helipoly", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list experiment ids")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("experiment", nargs="?", help="experiment id (see `helipoly list`)")
    p.add_argument("--config", help="flat config file with [experiment] and [params] sections")
    p.add_argument("--out", help="output directory (default runs/<id>)")
    p.add_argument("--full", action="store_true", help="use full-resolution parameters")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for parameter sweeps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate-config", help="parse and check a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        return _error(HelipolyError("--jobs must be at least 1"))
    try:
        return args.func(args)
    except (HelipolyError, FileNotFoundError, ValueError) as exc:
        return _error(exc)


if __name__ == "__main__":
    sys.exit(main())
