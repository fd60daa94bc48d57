"""Command line front end.

Three subcommands: ``analyze`` prints the model table, ``simulate`` runs
the seeded simulators, ``compare`` does both and writes the report.
Defaults come from ExperimentSpec, overridden first by a JSON config file
and then by explicit flags.  Output lands in --out, the NCTCP_OUT
environment variable, or ./out, in that order.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

from .harness import ExperimentSpec, analyze, compare, simulate

_TUPLE_FIELDS = {"q_list", "p_list", "srtt_list"}


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of spec fields; flags override it")
    p.add_argument("--q", type=_float_list, dest="q_list", metavar="Q[,Q...]",
                   help="per-link loss rates")
    p.add_argument("--p", type=_float_list, dest="p_list", metavar="P[,P...]",
                   help="end-to-end loss rates (overrides --q)")
    p.add_argument("--links", type=int, help="hop count expanding --q")
    p.add_argument("--p-d", type=float, dest="p_d", help="round blackout probability")
    p.add_argument("--rtt", type=float, help="round-trip time, seconds")
    p.add_argument("--wmax", type=float, dest="w_max", help="window cap, packets")
    p.add_argument("--to", type=float, dest="to_rounds", help="base timeout, rounds")
    p.add_argument("--redundancy", type=float, dest="redundancy_r",
                   help="coded transmissions per data packet")
    p.add_argument("--tp", type=float, dest="t_p",
                   help="single packet transmission time, seconds")
    p.add_argument("--packet-bits", type=int, dest="packet_bits")
    p.add_argument("--horizon", type=float, dest="horizon_s",
                   help="experiment length, seconds")
    p.add_argument("--trials", type=int, help="simulation repeats per loss point")
    p.add_argument("--seed", type=int, help="base seed for all trials")
    p.add_argument("--srtt", type=_float_list, dest="srtt_list", metavar="S[,S...]",
                   help="measured smoothed RTT per loss point, for the model table")
    p.add_argument("--out", help="output directory (default $NCTCP_OUT or ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nctcp",
        description="Throughput models and simulators for standard and coded TCP "
        "over lossy paths.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="print and write the analytical table")
    _add_common(p_an)

    p_sim = sub.add_parser("simulate", help="run the seeded round simulators")
    _add_common(p_sim)
    p_sim.add_argument("--protocol", choices=("tcp", "e2e", "both"), default="both")

    p_cmp = sub.add_parser("compare", help="simulate both protocols and write "
                           "the comparison report with figures")
    _add_common(p_cmp)
    p_cmp.add_argument("--analytical-srtt", action="store_true",
                       help="use the modelled smoothed RTT instead of the measured one")
    p_cmp.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering")
    return parser


def _build_spec(args: argparse.Namespace) -> ExperimentSpec:
    values: dict = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        if not isinstance(raw, dict):
            raise ValueError("config must be a flat JSON object")
        known = {f.name for f in fields(ExperimentSpec)}
        for key, val in raw.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            if key in _TUPLE_FIELDS and val is not None:
                val = tuple(val)
            values[key] = val
    for f in fields(ExperimentSpec):
        flag_val = getattr(args, f.name, None)
        if flag_val is not None:
            values[f.name] = flag_val
    # --p on the command line replaces any configured q sweep
    if getattr(args, "p_list", None) is not None:
        values["p_list"] = args.p_list
    return ExperimentSpec(**values)


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or os.environ.get("NCTCP_OUT") or "out")


def _print_rows(rows: list[dict]) -> None:
    hdr = f"{'point':>10} {'p':>9} {'coded Mb/s':>12} {'tcp Mb/s':>12} {'status':>8}"
    print(hdr)
    for r in rows:
        e2e = r["e2e_sim_mbps"] if r["e2e_sim_mbps"] is not None else r["e2e_analysis_mbps"]
        tcp = r["tcp_sim_mbps"] if r["tcp_sim_mbps"] is not None else r["tcp_analysis_mbps"]
        print(
            f"{r['label']:>10} {r['p']:>9.4f} "
            f"{e2e if e2e is not None else float('nan'):>12.4f} "
            f"{tcp if tcp is not None else float('nan'):>12.4f} "
            f"{r['status']:>8}"
        )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _build_spec(args)
        out = _out_dir(args)
        if args.command == "analyze":
            agg = analyze(spec, out)
        elif args.command == "simulate":
            agg = simulate(spec, protocol=args.protocol, out_dir=out)
        else:
            agg = compare(
                spec,
                out,
                analytical_srtt=args.analytical_srtt,
                render_figures=not args.no_figures,
            )
        _print_rows(agg["rows"])
        print(f"wrote {out}")
        return 0
    except Exception as exc:  # runtime failure, distinct from usage errors
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
