"""Closed-form throughput models for TCP and coded TCP over erasure paths.

Everything here is plain arithmetic on floats. The congestion-avoidance
models work in units of rounds (one round trip per round) and packets;
conversions to wall-clock seconds and Mbps happen at the reporting edge.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

__all__ = [
    "ErasureParams",
    "TcpConfig",
    "NcConfig",
    "ThroughputReport",
    "effective_loss",
    "tcp_expected_td_packets",
    "tcp_expected_rounds",
    "tcp_expected_window",
    "tcp_timeout_prob",
    "tcp_timeout_duration",
    "tcp_td_throughput",
    "tcp_avg_throughput",
    "e2e_expected_window",
    "e2e_expected_transmissions",
    "e2e_srtt",
    "e2e_round_throughput",
    "e2e_avg_throughput",
    "downstate_expectations",
    "combined_throughput",
]

# Largest per-packet loss rate for which the duplicate-ACK round count is
# real valued; the radicand of tcp_expected_rounds hits zero here.
P_MAX_TCP = 12.0 / 13.0


@dataclass
class ErasureParams:
    """Loss description for one path.

    Either give ``p`` directly, or give a per-link loss rate ``q`` with a
    hop count ``links`` and the end-to-end rate is derived as
    1 - (1 - q)^links.  ``p_d`` is the probability that a whole round is
    blacked out (both directions down).
    """

    p: float | None = None
    p_d: float = 0.0
    q: float | None = None
    links: int | None = None

    def __post_init__(self) -> None:
        if self.q is not None:
            if self.p is not None:
                raise ValueError("give either p or (q, links), not both")
            if self.links is None or self.links < 1:
                raise ValueError("links must be a positive count when q is given")
            self.p = effective_loss(self.q, self.links)
        if self.p is None:
            raise ValueError("either p or (q, links) is required")
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"p must be in [0, 1), got {self.p}")
        if not 0.0 <= self.p_d < 1.0:
            raise ValueError(f"p_d must be in [0, 1), got {self.p_d}")


@dataclass
class TcpConfig:
    """Standard-TCP parameters.

    ``to_rounds`` is the base retransmission-timeout length in rounds.
    ``retransmission_extra_rounds`` is the extra per-recovery delay used by
    the averaged throughput model to account for the retransmission pause
    observed in packet-level runs.  ``beta`` (ACKs per packet) is fixed at 1.
    """

    rtt: float = 0.8
    w_max: float = 90.0
    to_rounds: float = 3.75
    packet_bits: int = 8000
    retransmission_extra_rounds: float = 2.0
    beta: int = 1

    def __post_init__(self) -> None:
        if self.rtt <= 0:
            raise ValueError("rtt must be positive")
        if self.w_max < 1:
            raise ValueError("w_max must be at least 1")
        if self.to_rounds <= 0:
            raise ValueError("to_rounds must be positive")
        if self.packet_bits <= 0:
            raise ValueError("packet_bits must be positive")
        if self.retransmission_extra_rounds < 0:
            raise ValueError("retransmission_extra_rounds cannot be negative")
        if self.beta != 1:
            raise ValueError("only beta == 1 is supported")


@dataclass
class NcConfig:
    """Coded-TCP parameters.

    ``redundancy_r`` is the mean number of coded transmissions per data
    packet.  ``t_p`` is the single-packet transmission time in seconds,
    which drives the smoothed-RTT inflation under loss.  ``srtt_override``
    substitutes a measured smoothed RTT for the modelled one.
    """

    redundancy_r: float = 1.25
    t_p: float = 0.008
    w1: float = 1.0
    srtt_override: float | None = None

    def __post_init__(self) -> None:
        if self.redundancy_r < 1.0:
            raise ValueError("redundancy_r must be at least 1")
        if self.t_p < 0:
            raise ValueError("t_p cannot be negative")
        if self.w1 < 1:
            raise ValueError("w1 must be at least 1")
        if self.srtt_override is not None and self.srtt_override <= 0:
            raise ValueError("srtt_override must be positive")

    def check_redundancy(self, p: float) -> None:
        # r below 1/(1-p) cannot keep up with the loss rate; warn, don't reject.
        floor = 1.0 / (1.0 - p) if p < 1.0 else math.inf
        if self.redundancy_r < floor:
            warnings.warn(
                f"redundancy {self.redundancy_r:.4f} is below the sustainable "
                f"floor 1/(1-p) = {floor:.4f} for p = {p:.4f}",
                stacklevel=2,
            )


@dataclass
class ThroughputReport:
    pkts_per_sec: float
    mbps: float
    params: dict = field(default_factory=dict)


def _report(pkts_per_sec: float, packet_bits: int, **params) -> ThroughputReport:
    return ThroughputReport(
        pkts_per_sec=pkts_per_sec,
        mbps=pkts_per_sec * packet_bits / 1e6,
        params=params,
    )


def effective_loss(q: float, links: int) -> float:
    """End-to-end erasure rate of ``links`` independent hops, each losing q."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must be in [0, 1), got {q}")
    if links < 1:
        raise ValueError("links must be a positive count")
    return 1.0 - (1.0 - q) ** links


def tcp_expected_td_packets(p: float) -> float:
    """Mean packets delivered between consecutive duplicate-ACK halvings.

    The count of in-order deliveries before the next lost packet is
    geometric, with mean (1 - p) / p.
    """
    _check_p_open(p)
    return (1.0 - p) / p


def tcp_expected_rounds(p: float) -> float:
    r"""Mean rounds in one duplicate-ACK cycle.

    Positive root of (3/2)(r - 1)^2 + (r - 3/4) = (1 - p)/p, in closed form

        r = 2/3 + sqrt(-1/18 + (2/3)(1 - p)/p)

    Real valued only for p <= 12/13.
    """
    _check_p_open(p)
    if p > P_MAX_TCP:
        raise ValueError(f"p must be at most 12/13 for the round model, got {p}")
    radicand = -1.0 / 18.0 + (2.0 / 3.0) * (1.0 - p) / p
    if radicand < 0.0:
        # only reachable through rounding right at p = 12/13
        radicand = 0.0
    return 2.0 / 3.0 + math.sqrt(radicand)


def tcp_expected_window(p: float) -> float:
    """Mean congestion window over a duplicate-ACK cycle, (3/2) E[r] - 1."""
    return 1.5 * tcp_expected_rounds(p) - 1.0


def tcp_timeout_prob(w: float, p: float) -> float:
    """Probability that a loss round leads to a timeout instead of a halving.

    A window below 3 can never raise the three duplicate ACKs needed for a
    halving, so it times out with certainty.  Otherwise at most two of the
    w packets may arrive:

        sum_{i=0}^{2} C(w, i) p^(w-i) (1-p)^i

    with the binomial coefficients extended polynomially to real w.
    Clamped to [0, 1].
    """
    if w < 1:
        raise ValueError("window must be at least 1")
    _check_p_open(p)
    if w < 3:
        return 1.0
    c = (1.0, w, w * (w - 1.0) / 2.0)
    total = sum(c[i] * p ** (w - i) * (1.0 - p) ** i for i in range(3))
    return min(1.0, max(0.0, total))


def tcp_timeout_duration(p: float, to_rounds: float) -> float:
    """Mean length of a timeout episode, in rounds.

    Weighted sum over the doubling backoff ladder; the per-step weights are
    the probabilities of 1, 2, ... consecutive losses, and the ladder caps
    at 64 base periods:

        (1-p) [ T p + 3T p^2 + 7T p^3 + 15T p^4 + 31T p^5
                + 63T p^6/(1-p) + 64T p^7/(1-p)^2 ]
    """
    _check_p_open(p, allow_zero=True)
    if to_rounds <= 0:
        raise ValueError("to_rounds must be positive")
    t = to_rounds
    inner = (
        t * p
        + 3.0 * t * p**2
        + 7.0 * t * p**3
        + 15.0 * t * p**4
        + 31.0 * t * p**5
        + 63.0 * t * p**6 / (1.0 - p)
        + 64.0 * t * p**7 / (1.0 - p) ** 2
    )
    return (1.0 - p) * inner


def tcp_td_throughput(p: float, tcp: TcpConfig) -> ThroughputReport:
    """Throughput of the duplicate-ACK-only model, ignoring timeouts.

    min(w_max / rtt, ((1-p)/p) / (rtt (E[r] + 1))) packets per second.
    For small p this approaches sqrt(3 / (2p)) / rtt.
    """
    if p == 0.0:
        return _report(tcp.w_max / tcp.rtt, tcp.packet_bits, p=p, model="td")
    rounds = tcp_expected_rounds(p) + 1.0
    pps = min(tcp.w_max / tcp.rtt, tcp_expected_td_packets(p) / (tcp.rtt * rounds))
    return _report(pps, tcp.packet_bits, p=p, model="td")


def tcp_avg_throughput(p: float, tcp: TcpConfig) -> ThroughputReport:
    """Averaged TCP throughput with both loss responses included.

    Extends the duplicate-ACK cycle by the timeout tax: each cycle pays
    P(TO | E[W]) times the mean timeout length, and every recovery adds the
    configured retransmission pause.

        min(w_max/rtt, ((1-p)/p) / (rtt (E[r] + 1 + x + P(TO|E[W]) (E[dur] + x))))
    """
    if p == 0.0:
        return _report(tcp.w_max / tcp.rtt, tcp.packet_bits, p=p, model="tcp")
    e_r = tcp_expected_rounds(p)
    e_w = tcp_expected_window(p)
    p_to = tcp_timeout_prob(max(1.0, e_w), p)
    dur = tcp_timeout_duration(p, tcp.to_rounds)
    extra = tcp.retransmission_extra_rounds
    cycle_rounds = e_r + 1.0 + extra + p_to * (dur + extra)
    pps = min(
        tcp.w_max / tcp.rtt,
        tcp_expected_td_packets(p) / (tcp.rtt * cycle_rounds),
    )
    return _report(
        pps,
        tcp.packet_bits,
        p=p,
        model="tcp",
        e_r=e_r,
        e_w=e_w,
        p_to=p_to,
        to_duration=dur,
    )


def e2e_expected_window(i: int, p: float, w_max: float, w1: float = 1.0) -> float:
    """Mean coded-TCP window at round i: min(w_max, w1 + i (1 - p)).

    Each round acknowledges a (1 - p) fraction of the window, and the
    window grows by one per window's worth of ACKs, so growth is linear at
    rate (1 - p) until the cap.
    """
    if i < 0:
        raise ValueError("round index cannot be negative")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must be in [0, 1), got {p}")
    if w1 < 1 or w_max < w1:
        raise ValueError("need 1 <= w1 <= w_max")
    return min(w_max, w1 + i * (1.0 - p))


def e2e_expected_transmissions(w: float, p: float) -> float:
    """Mean transmissions for the window to walk from 1 up to w.

    The growth ladder visits w(w-1)/2 states below w, and leaving each
    state takes a geometric 1/(1-p) transmissions, hence

        T(w) = w (w - 1) / (2 (1 - p)).
    """
    if w < 1:
        raise ValueError("window must be at least 1")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must be in [0, 1), got {p}")
    return w * (w - 1.0) / (2.0 * (1.0 - p))


def e2e_srtt(rtt: float, t_p: float, p: float) -> float:
    """Smoothed RTT seen by the coded sender: rtt + t_p p / (1 - p).

    A lost packet's information rides the next arriving combination, one
    packet slot later each time, and the run of consecutive losses is
    geometric.
    """
    if rtt <= 0:
        raise ValueError("rtt must be positive")
    if t_p < 0:
        raise ValueError("t_p cannot be negative")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must be in [0, 1), got {p}")
    return rtt + t_p * p / (1.0 - p)


def _resolve_srtt(p: float, nc: NcConfig, rtt: float | None) -> float:
    if nc.srtt_override is not None:
        return nc.srtt_override
    if rtt is None:
        raise ValueError("rtt is required when NcConfig has no srtt_override")
    return e2e_srtt(rtt, nc.t_p, p)


def e2e_round_throughput(
    i: int, p: float, nc: NcConfig, w_max: float, rtt: float | None = None
) -> float:
    """Instantaneous coded throughput at round i, in packets per second.

    (1 - p) E[W_i] / (R SRTT): the round delivers a (1 - p) share of the
    window, and only a 1/R share of the delivered stream is data.
    """
    srtt = _resolve_srtt(p, nc, rtt)
    w_i = e2e_expected_window(i, p, w_max, nc.w1)
    return (1.0 - p) * w_i / (nc.redundancy_r * srtt)


def _window_area(n: int, p: float, w1: float, w_max: float) -> float:
    # sum of E[W_i] over rounds 1..n, with the ramp capped at w_max
    r_star = (w_max - w1) / (1.0 - p) if p < 1.0 else math.inf
    if n <= r_star:
        return n * w1 + (1.0 - p) * n * (n + 1.0) / 2.0
    return (
        n * w_max
        - r_star * (w_max - w1)
        + (1.0 - p) * r_star * (r_star - 1.0) / 2.0
    )


def e2e_avg_throughput(
    n: int,
    p: float,
    nc: NcConfig,
    w_max: float,
    packet_bits: int,
    rtt: float | None = None,
) -> ThroughputReport:
    """Coded throughput averaged over an n-round horizon.

    (1 - p) f(n) / (n R SRTT) where f(n) integrates the window ramp:
    linear growth at rate (1 - p) from w1 until w_max, flat afterwards.
    Approaches (1 - p) w_max / (R SRTT) for long horizons.
    """
    if n < 1:
        raise ValueError("horizon must cover at least one round")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must be in [0, 1), got {p}")
    srtt = _resolve_srtt(p, nc, rtt)
    area = _window_area(n, p, nc.w1, w_max)
    pps = (1.0 - p) * area / (n * nc.redundancy_r * srtt)
    return _report(
        pps, packet_bits, p=p, model="e2e", n=n, srtt=srtt, r=nc.redundancy_r
    )


def downstate_expectations(p_d: float) -> tuple[float, float]:
    """Mean lengths of the up and down stretches between state flips.

    Rounds are down independently with probability p_d.  The run of up
    rounds after a down round has mean (1 - p_d)/p_d; the run of extra
    down rounds after the first has mean p_d/(1 - p_d).
    """
    if not 0.0 < p_d < 1.0:
        raise ValueError(f"p_d must be in (0, 1), got {p_d}")
    return (1.0 - p_d) / p_d, p_d / (1.0 - p_d)


def combined_throughput(
    kind: str,
    erasure: ErasureParams,
    tcp: TcpConfig,
    nc: NcConfig | None = None,
    horizon_rounds: int | None = None,
) -> ThroughputReport:
    """Long-run throughput with round blackouts folded in.

    Down rounds deliver nothing and occur independently with probability
    p_d, so the long-run average is the up-state throughput scaled by the
    up fraction (1 - p_d) exactly.
    """
    p_d = erasure.p_d
    if kind == "tcp":
        up = tcp_avg_throughput(erasure.p, tcp)
    elif kind == "e2e":
        if nc is None:
            raise ValueError("kind 'e2e' needs an NcConfig")
        if horizon_rounds is None:
            raise ValueError("kind 'e2e' needs horizon_rounds")
        up = e2e_avg_throughput(
            horizon_rounds, erasure.p, nc, tcp.w_max, tcp.packet_bits, rtt=tcp.rtt
        )
    else:
        raise ValueError(f"unknown kind {kind!r}, expected 'tcp' or 'e2e'")
    pps = up.pkts_per_sec * (1.0 - p_d)
    params = dict(up.params)
    params.update(p_d=p_d, up_pkts_per_sec=up.pkts_per_sec)
    return ThroughputReport(
        pkts_per_sec=pps,
        mbps=pps * tcp.packet_bits / 1e6,
        params=params,
    )


def _check_p_open(p: float, allow_zero: bool = False) -> None:
    lo_ok = p >= 0.0 if allow_zero else p > 0.0
    if not (lo_ok and p < 1.0):
        bound = "[0, 1)" if allow_zero else "(0, 1)"
        raise ValueError(f"p must be in {bound}, got {p}")
