"""Report figures, rendered headless to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SERIES = (
    ("e2e_analysis_mbps", "coded, analysis", "C0", "-"),
    ("e2e_sim_mbps", "coded, simulation", "C0", "--"),
    ("tcp_analysis_mbps", "standard, analysis", "C3", "-"),
    ("tcp_sim_mbps", "standard, simulation", "C3", "--"),
)


def render_throughput(rows: list[dict], path: str | Path) -> None:
    """Throughput against the loss sweep, log scale, both protocols."""
    xs = [r["q"] if r["q"] is not None else r["p"] for r in rows]
    xlabel = "per-link loss rate" if rows and rows[0]["q"] is not None else "loss rate"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key, label, color, style in _SERIES:
        ys = [r[key] for r in rows]
        pairs = [(x, y) for x, y in zip(xs, ys) if y is not None]
        if pairs:
            ax.plot(*zip(*pairs), style, color=color, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("throughput (Mb/s)")
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_windows(rounds: int, series: dict, path: str | Path) -> None:
    """Mean congestion window per round for every simulated series."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = range(1, rounds + 1)
    for name in sorted(series):
        style = "-" if name.startswith("e2e") else "--"
        ax.plot(xs, series[name], style, label=name)
    ax.set_xlabel("round")
    ax.set_ylabel("window (packets)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
