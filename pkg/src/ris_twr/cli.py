"""Command-line front end producing the sweep CSVs.

Subcommands map onto the sweep variable: ``sweep-power``, ``sweep-elements``,
``sweep-antennas`` and ``cdf`` (a single operating point whose per-algorithm
CDF knots are written next to the samples). Options can also come from a
JSON config file mirroring the experiment spec; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    ExperimentSpec,
    run_sweep,
    write_cdf_csv,
    write_samples_csv,
    write_summary_csv,
)

_SCENARIOS = {
    "single": "single_antenna",
    "single_antenna": "single_antenna",
    "multi": "multi_antenna",
    "multi_antenna": "multi_antenna",
}

FULL_SCALE_TRIALS = 1000


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=sorted(_SCENARIOS), default=None,
                   help="single_antenna or multi_antenna")
    p.add_argument("--algorithms", nargs="+", default=None,
                   help="subset of the scenario's algorithms (default: all)")
    p.add_argument("--trials", type=int, default=None, help="Monte-Carlo trials per point")
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--ps-dbm", type=float, default=None, help="user transmit power [dBm]")
    p.add_argument("--pb-dbm", type=float, nargs="+", default=None,
                   help="relay power budget [dBm]; a list when sweeping power")
    p.add_argument("--nh", type=int, default=None, help="RIS elements per row")
    p.add_argument("--nv", type=int, nargs="+", default=None,
                   help="RIS element rows; a list when sweeping elements")
    p.add_argument("--m", type=int, nargs="+", default=None,
                   help="relay antennas; a list when sweeping antennas")
    p.add_argument("--generations", type=int, default=None, help="GSM candidate generations")
    p.add_argument("--draws", type=int, default=None, help="Gaussian randomization draws")
    p.add_argument("--out", type=Path, default=Path("results.csv"), help="samples CSV path")
    p.add_argument("--config", type=Path, default=None, help="JSON file mirroring the experiment spec")
    p.add_argument("--full-scale", action="store_true",
                   help=f"use {FULL_SCALE_TRIALS} trials unless --trials is given")
    p.add_argument("--workers", type=int, default=None, help="process pool size (default: all cores)")


def _scalar(name: str, values, expect_list: bool):
    if values is None or expect_list:
        return values
    if len(values) != 1:
        raise ValueError(f"--{name} expects a single value for this subcommand")
    return values[0]


def build_spec(args: argparse.Namespace) -> ExperimentSpec:
    base = {}
    if args.config is not None:
        base = json.loads(Path(args.config).read_text())

    sweep_power = args.command == "sweep-power"
    sweep_elems = args.command == "sweep-elements"
    sweep_ants = args.command == "sweep-antennas"

    pb = _scalar("pb-dbm", args.pb_dbm, sweep_power)
    nv = _scalar("nv", args.nv, sweep_elems)
    m = _scalar("m", args.m, sweep_ants)

    if sweep_power:
        base["sweep_var"] = "p_b_dbm"
        if pb is not None:
            base["sweep_values"] = [float(v) for v in pb]
        base.setdefault("sweep_values", [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    elif sweep_elems:
        base["sweep_var"] = "n_v"
        if nv is not None:
            base["sweep_values"] = [int(v) for v in nv]
        base.setdefault("sweep_values", [4, 7, 10, 13, 16])
    elif sweep_ants:
        base["sweep_var"] = "m"
        if m is not None:
            base["sweep_values"] = [int(v) for v in m]
        base.setdefault("sweep_values", [1, 2, 4, 8])
    else:  # cdf: one operating point over the power variable
        base["sweep_var"] = "p_b_dbm"
        base["sweep_values"] = [float(pb) if pb is not None else base.get("p_b_dbm", 10.0)]

    if args.scenario is not None:
        base["scenario"] = _SCENARIOS[args.scenario]
    if args.algorithms is not None:
        base["algorithms"] = args.algorithms
    if args.trials is not None:
        base["trials"] = args.trials
    elif args.full_scale:
        base["trials"] = FULL_SCALE_TRIALS
    if args.seed is not None:
        base["base_seed"] = args.seed
    if args.ps_dbm is not None:
        base["p_s_dbm"] = args.ps_dbm
    if not sweep_power and pb is not None:
        base["p_b_dbm"] = float(pb)
    if args.nh is not None:
        base["n_h"] = args.nh
    if not sweep_elems and nv is not None:
        base["n_v"] = int(nv)
    if not sweep_ants and m is not None:
        base["m"] = int(m)
    if args.generations is not None:
        base["generations"] = args.generations
    if args.draws is not None:
        base["draws"] = args.draws

    if base.get("scenario") == "multi_antenna" and "m" not in base and not sweep_ants:
        base["m"] = 4
    return ExperimentSpec.from_dict(base)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ris-twr",
                                     description="Monte-Carlo sweeps for RIS-assisted two-way relaying")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("sweep-power", "mean min-SNR over the relay power budget"),
        ("sweep-elements", "mean min-SNR over the number of RIS element rows"),
        ("sweep-antennas", "mean min-SNR over the number of relay antennas"),
        ("cdf", "min-SNR distribution at one operating point"),
    ):
        _add_common(sub.add_parser(name, help=helptext))

    args = parser.parse_args(argv)
    try:
        spec = build_spec(args)
        result = run_sweep(spec, workers=args.workers)
        out: Path = args.out
        write_samples_csv(result, out)
        write_summary_csv(result, out.with_name(out.stem + "_summary" + out.suffix))
        if args.command == "cdf":
            write_cdf_csv(result, out.with_name(out.stem + "_cdf" + out.suffix))
    except Exception as exc:
        print(f'error: {json.dumps({"type": type(exc).__name__, "message": str(exc)})}',
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
