"""Experiment harness: analytical tables, simulation sweeps, and the
side-by-side comparison report.

Every command produces one aggregate JSON plus delimited output; rerunning
with the same spec reproduces the files byte for byte, so there are no
timestamps or environment fingerprints in anything written here.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import model
from .model import NcConfig, TcpConfig
from .sim import ChannelModel, measure_srtt, run_e2e, run_tcp

__all__ = ["ExperimentSpec", "analyze", "simulate", "compare"]

THROUGHPUT_CSV = "throughput_vs_q.csv"
WINDOW_CSV = "window_vs_round.csv"
TRACE_DIR = "traces"

_CSV_COLUMNS = (
    "label",
    "q",
    "p",
    "e2e_analysis_mbps",
    "tcp_analysis_mbps",
    "e2e_sim_mbps",
    "tcp_sim_mbps",
    "status",
)


@dataclass(frozen=True)
class LossPoint:
    label: str
    p: float
    q: float | None


@dataclass
class ExperimentSpec:
    """One sweep over loss rates with everything else held fixed.

    Loss points come from ``q_list`` (per-link rate, expanded over
    ``links`` hops) unless ``p_list`` gives end-to-end rates directly.
    ``srtt_list`` supplies measured smoothed RTTs for the analytical
    table, one per loss point; when absent or misaligned the modelled
    value is used instead.
    """

    q_list: tuple[float, ...] = (0.015, 0.025, 0.05)
    links: int = 4
    p_list: tuple[float, ...] | None = None
    p_d: float = 0.0
    rtt: float = 0.8
    w_max: float = 90.0
    to_rounds: float = 3.75
    redundancy_r: float = 1.25
    t_p: float = 0.008
    packet_bits: int = 8000
    horizon_s: float = 1000.0
    trials: int = 30
    seed: int = 0
    srtt_list: tuple[float, ...] | None = (0.8396, 0.8434, 0.8540)

    def __post_init__(self) -> None:
        if self.p_list is None and len(self.q_list) == 0:
            raise ValueError("need at least one loss point")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.horizon_s <= 0:
            raise ValueError("horizon_s must be positive")
        if self.horizon_s < self.rtt:
            raise ValueError("horizon shorter than one round trip")

    def loss_points(self) -> list[LossPoint]:
        if self.p_list is not None:
            return [LossPoint(f"p{p:g}", float(p), None) for p in self.p_list]
        return [
            LossPoint(f"q{q:g}", model.effective_loss(q, self.links), q)
            for q in self.q_list
        ]

    def tcp_config(self) -> TcpConfig:
        return TcpConfig(
            rtt=self.rtt,
            w_max=self.w_max,
            to_rounds=self.to_rounds,
            packet_bits=self.packet_bits,
        )

    def nc_config(self, srtt_override: float | None = None) -> NcConfig:
        return NcConfig(
            redundancy_r=self.redundancy_r,
            t_p=self.t_p,
            srtt_override=srtt_override,
        )

    @property
    def sim_rounds(self) -> int:
        return int(self.horizon_s / self.rtt)

    def analysis_srtt(self, index: int, p: float) -> float:
        points = self.p_list if self.p_list is not None else self.q_list
        if self.srtt_list is not None and len(self.srtt_list) == len(points):
            return self.srtt_list[index]
        return model.e2e_srtt(self.rtt, self.t_p, p)

    def trial_seed(self, point_index: int, trial: int) -> int:
        # distinct deterministic seed per (loss point, trial)
        return self.seed * 1_000_003 + point_index * 10_007 + trial


def _blank_row(lp: LossPoint) -> dict:
    return {
        "label": lp.label,
        "q": lp.q,
        "p": lp.p,
        "srtt_analysis": None,
        "n_analysis": None,
        "e2e_analysis_mbps": None,
        "tcp_analysis_mbps": None,
        "srtt_measured": None,
        "e2e_sim_mbps": None,
        "e2e_sim_std": None,
        "tcp_sim_mbps": None,
        "tcp_sim_std": None,
        "e2e_rel_err": None,
        "tcp_rel_err": None,
        "status": "ok",
        "note": "",
    }


def _fill_analysis(row: dict, spec: ExperimentSpec, srtt: float) -> None:
    p = row["p"]
    n = int(spec.horizon_s / srtt)
    row["srtt_analysis"] = float(srtt)
    row["n_analysis"] = n
    e2e = model.e2e_avg_throughput(
        n, p, spec.nc_config(srtt), spec.w_max, spec.packet_bits
    )
    row["e2e_analysis_mbps"] = float(e2e.mbps)
    try:
        row["tcp_analysis_mbps"] = float(model.tcp_avg_throughput(p, spec.tcp_config()).mbps)
    except ValueError as exc:
        row["status"] = "error"
        row["note"] = str(exc)


def analyze(spec: ExperimentSpec, out_dir: str | Path | None = None) -> dict:
    """Analytical throughput table over the spec's loss points.

    A loss point outside the TCP model's domain gets an error status row;
    the sweep keeps going.
    """
    rows = []
    for i, lp in enumerate(spec.loss_points()):
        row = _blank_row(lp)
        _fill_analysis(row, spec, spec.analysis_srtt(i, lp.p))
        rows.append(row)
    agg = {"kind": "analyze", "spec": asdict(spec), "rows": rows}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(agg, out / "analysis.json")
        _write_throughput_csv(rows, out / THROUGHPUT_CSV)
    return agg


def _run_sims(
    spec: ExperimentSpec,
    protocols: tuple[str, ...],
    out_dir: Path | None,
    write_traces: bool,
) -> tuple[list[dict], dict[str, np.ndarray]]:
    rounds = spec.sim_rounds
    tcp_cfg = spec.tcp_config()
    nc_cfg = spec.nc_config()
    rows = []
    window_series: dict[str, np.ndarray] = {}
    trace_dir = None
    if out_dir is not None and write_traces:
        trace_dir = out_dir / TRACE_DIR
        trace_dir.mkdir(parents=True, exist_ok=True)
    for i, lp in enumerate(spec.loss_points()):
        row = _blank_row(lp)
        for proto in protocols:
            mbps = []
            srtts = []
            win_sum = np.zeros(rounds)
            for t in range(spec.trials):
                ch = ChannelModel(p=lp.p, p_d=spec.p_d, seed=spec.trial_seed(i, t))
                if proto == "tcp":
                    trace, rep = run_tcp(tcp_cfg, ch, rounds, t_p=spec.t_p)
                else:
                    trace, rep = run_e2e(tcp_cfg, nc_cfg, ch, rounds)
                mbps.append(rep.mbps)
                if trace.rtt_samples:
                    srtts.append(measure_srtt(trace.rtt_samples))
                win_sum += np.fromiter(
                    (tr.window for tr in trace.rows), dtype=float, count=rounds
                )
                if trace_dir is not None:
                    trace.write_csv(trace_dir / f"{proto}_{lp.label}_t{t:02d}.csv")
            row[f"{proto}_sim_mbps"] = float(np.mean(mbps))
            row[f"{proto}_sim_std"] = float(np.std(mbps))
            if proto == "e2e" and srtts:
                row["srtt_measured"] = float(np.mean(srtts))
            window_series[f"{proto}_{lp.label}"] = win_sum / spec.trials
        rows.append(row)
    return rows, window_series


def simulate(
    spec: ExperimentSpec,
    protocol: str = "both",
    out_dir: str | Path | None = None,
    write_traces: bool = True,
) -> dict:
    """Run the seeded simulators over the spec's loss points."""
    if protocol not in ("tcp", "e2e", "both"):
        raise ValueError(f"unknown protocol {protocol!r}")
    protocols = ("tcp", "e2e") if protocol == "both" else (protocol,)
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    rows, window_series = _run_sims(spec, protocols, out, write_traces)
    agg = {"kind": "simulate", "spec": asdict(spec), "rows": rows}
    if out is not None:
        _write_json(agg, out / "simulation.json")
        _write_throughput_csv(rows, out / THROUGHPUT_CSV)
        _write_window_csv(spec.sim_rounds, window_series, out / WINDOW_CSV)
    return agg


def compare(
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    analytical_srtt: bool = False,
    render_figures: bool = True,
    write_traces: bool = True,
) -> dict:
    """Simulate both protocols and set the results against the models.

    The analytical coded-TCP column uses the smoothed RTT measured in the
    paired simulation unless ``analytical_srtt`` asks for the modelled
    value.  Writes the aggregate JSON, the delimited tables, per-trial
    traces, and the report figures.
    """
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    rows, window_series = _run_sims(spec, ("tcp", "e2e"), out, write_traces)
    for i, row in enumerate(rows):
        if analytical_srtt or row["srtt_measured"] is None:
            srtt = model.e2e_srtt(spec.rtt, spec.t_p, row["p"])
        else:
            srtt = row["srtt_measured"]
        _fill_analysis(row, spec, srtt)
        for proto in ("e2e", "tcp"):
            ana = row[f"{proto}_analysis_mbps"]
            sim = row[f"{proto}_sim_mbps"]
            if ana and sim is not None:
                row[f"{proto}_rel_err"] = float(abs(sim - ana) / ana)
    agg = {"kind": "compare", "spec": asdict(spec), "rows": rows}
    if out is not None:
        _write_json(agg, out / "comparison.json")
        _write_throughput_csv(rows, out / THROUGHPUT_CSV)
        _write_window_csv(spec.sim_rounds, window_series, out / WINDOW_CSV)
        if render_figures:
            from . import figures

            figures.render_throughput(rows, out / "throughput_vs_q.png")
            figures.render_windows(
                spec.sim_rounds, window_series, out / "window_vs_round.png"
            )
    return agg


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _write_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_throughput_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in _CSV_COLUMNS])


def _write_window_csv(
    rounds: int, series: dict[str, np.ndarray], path: Path
) -> None:
    names = sorted(series)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round"] + names)
        for r in range(rounds):
            w.writerow([r + 1] + [f"{series[n][r]:.4f}" for n in names])
