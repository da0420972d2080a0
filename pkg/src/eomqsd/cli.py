"""Run trajectory experiments and build report tables.

    eomqsd memory --config cfg.json --out results/ --traj 1000 --seed 7
    eomqsd memory --sweep physics.q_m=500,1000,1e4 --out sweep/
    eomqsd report results/a results/b --out report/

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, EomqsdError, ReportError
from .experiment import (KINDS, default_config, emit_report, format_summary, load_config,
                         load_record, run_experiment, sweep)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


HELP = {"memory": "store and retrieve a state in the mechanical mode",
        "transduce": "transfer a microwave state to the optical mode",
        "contour": "transfer fidelity over a pulse area x separation grid",
        "oracle-check": "compare the trajectory ensemble with the master equation"}


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_axis(spec):
    if "=" not in spec:
        raise ConfigError(f"sweep axis {spec!r} must look like field=v1,v2,...")
    name, values = spec.split("=", 1)
    vals = [_parse_value(v) for v in values.split(",") if v.strip()]
    if not vals:
        raise ConfigError("empty sweep axis", name)
    return name.strip(), vals


def build_parser():
    parser = argparse.ArgumentParser(prog="eomqsd", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=HELP[kind])
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--out", type=Path, help="results directory")
        p.add_argument("--traj", type=int, help="number of trajectories")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--overwrite", action="store_true", help="replace existing results")
        p.add_argument("--sweep", action="append", default=[], metavar="FIELD=V1,V2",
                       help="sweep a dotted config field; repeat for a grid")
    p = sub.add_parser("report", help="emit plot-ready tables from result directories")
    p.add_argument("records", nargs="+", type=Path, help="result directories or record.json")
    p.add_argument("--out", type=Path, required=True, help="report directory")
    return parser


def _configure(args):
    cfg = load_config(args.config) if args.config else default_config(args.command)
    if cfg.kind != args.command:
        raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand "
                          f"{args.command!r}", "kind")
    updates = {}
    if args.traj is not None:
        updates["numerics.n_traj"] = args.traj
    if args.seed is not None:
        updates["numerics.master_seed"] = args.seed
    if args.workers is not None:
        updates["numerics.workers"] = args.workers
    if args.out is not None:
        updates["output"] = str(args.out)
    return cfg.updated(updates) if updates else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            written = emit_report([load_record(r) for r in args.records], args.out)
            for name, path in written.items():
                print(f"{name}: {path}")
            return EXIT_OK
        cfg = _configure(args)
        if args.sweep:
            records = sweep(cfg, [_parse_axis(s) for s in args.sweep],
                            overwrite=args.overwrite)
            for r in records:
                print(f"{r.coords}  mean={r.summary['mean']:.6f}")
        else:
            rec = run_experiment(cfg, overwrite=args.overwrite)
            sys.stdout.write(format_summary(rec))
        return EXIT_OK
    except (ConfigError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EomqsdError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
