"""Round-based simulators for standard TCP and coded TCP.

One round is one round trip: the sender transmits a window's worth of
packets, the channel drops some, the receiver reacts, and the returning
ACKs drive the next round.  Both protocols share the channel abstraction
so paired runs see identical loss draws, and a recorded loss pattern can
be replayed bit for bit under either protocol.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .coding import DecoderState, encode_batch
from .model import NcConfig, TcpConfig, ThroughputReport

__all__ = [
    "ChannelModel",
    "TraceRow",
    "WindowTrace",
    "run_tcp",
    "run_e2e",
    "replay_loss_pattern",
    "measure_srtt",
]

TRACE_FIELDS = ("round", "window", "sent", "delivered", "ack_front", "event")

_BACKOFF_CAP = 64


@dataclass
class ChannelModel:
    """Erasure channel with independent per-packet loss and round blackouts.

    ``open()`` hands out fresh, independently seeded draw streams, so two
    opens of the same model replay identical loss sequences.  Packet data,
    ACKs, blackout draws, and coding coefficients each get their own
    stream: toggling ACK loss or switching protocol never perturbs the
    data-loss sequence.
    """

    p: float
    p_d: float = 0.0
    ack_loss_enabled: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"p must be in [0, 1), got {self.p}")
        if not 0.0 <= self.p_d < 1.0:
            raise ValueError(f"p_d must be in [0, 1), got {self.p_d}")

    def open(self) -> "_ChannelStreams":
        return _ChannelStreams(self)


class _ChannelStreams:
    _DATA, _ACK, _DOWN, _CODE = range(4)

    def __init__(self, model: ChannelModel) -> None:
        def gen(stream: int) -> np.random.Generator:
            return np.random.Generator(
                np.random.PCG64(np.random.SeedSequence((model.seed, stream)))
            )

        self._model = model
        self._data = gen(self._DATA)
        self._ack = gen(self._ACK)
        self._down = gen(self._DOWN)
        self.code_rng = gen(self._CODE)

    def down_round(self) -> bool:
        if self._model.p_d == 0.0:
            return False
        return bool(self._down.random() < self._model.p_d)

    def data_mask(self, n: int) -> np.ndarray:
        """True where the packet survives."""
        return self._data.random(n) >= self._model.p

    def ack_mask(self, n: int) -> np.ndarray:
        if not self._model.ack_loss_enabled:
            return np.ones(n, dtype=bool)
        return self._ack.random(n) >= self._model.p


class _PatternStreams:
    """Deterministic channel fed by a recorded loss pattern, one bit per
    transmitted packet (1 = lost).  Never goes down, never drops ACKs."""

    def __init__(self, bits: np.ndarray, code_rng: np.random.Generator) -> None:
        self._bits = bits
        self._pos = 0
        self.code_rng = code_rng

    @property
    def remaining(self) -> int:
        return self._bits.size - self._pos

    def down_round(self) -> bool:
        return False

    def data_mask(self, n: int) -> np.ndarray:
        if self._pos + n > self._bits.size:
            raise ValueError("loss pattern exhausted mid-round")
        out = self._bits[self._pos : self._pos + n] == 0
        self._pos += n
        return out

    def ack_mask(self, n: int) -> np.ndarray:
        return np.ones(n, dtype=bool)


@dataclass
class TraceRow:
    round: int
    window: float  # at the start of the round, before any growth
    sent: int
    delivered: int
    ack_front: int
    event: str  # none | TD | TO | DOWN


@dataclass
class WindowTrace:
    rows: list[TraceRow] = field(default_factory=list)
    rtt_samples: list[tuple[float, float]] = field(default_factory=list)

    @property
    def sent_total(self) -> int:
        return sum(r.sent for r in self.rows)

    @property
    def delivered_total(self) -> int:
        return sum(r.delivered for r in self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_FIELDS)
            for r in self.rows:
                w.writerow(
                    [r.round, f"{r.window:.6f}", r.sent, r.delivered, r.ack_front, r.event]
                )


def measure_srtt(samples: Iterable[tuple[float, float]]) -> float:
    """Smoothed RTT over (send_time, ack_time) pairs, EWMA with gain 1/8."""
    srtt = None
    for send, ack in samples:
        rtt = ack - send
        srtt = rtt if srtt is None else srtt + (rtt - srtt) / 8.0
    if srtt is None:
        raise ValueError("no RTT samples")
    return srtt


def _check_timeout(silent: int, backoff: int, to_rounds: float) -> bool:
    return silent >= to_rounds * backoff


def run_tcp(
    tcp: TcpConfig,
    ch: ChannelModel,
    rounds: int,
    t_p: float = 0.0,
) -> tuple[WindowTrace, ThroughputReport]:
    """Simulate standard TCP for a fixed number of rounds.

    Go-back-N with cumulative ACKs: out-of-order data is discarded and
    re-ACKs the expected index.  Three duplicate ACKs halve the window and
    rewind the sender; a silent stretch of to_rounds (doubling per repeat,
    capped) resets it to one.  Throughput counts in-order deliveries over
    rounds * rtt seconds.
    """
    if rounds < 1:
        raise ValueError("rounds must be positive")
    trace = _tcp_loop(tcp, ch.open(), rounds, t_p, stop_on_exhaust=False)
    pps = trace.delivered_total / (rounds * tcp.rtt)
    report = ThroughputReport(
        pkts_per_sec=pps,
        mbps=pps * tcp.packet_bits / 1e6,
        params={"protocol": "tcp", "p": ch.p, "p_d": ch.p_d, "rounds": rounds,
                "seed": ch.seed},
    )
    return trace, report


def run_e2e(
    tcp: TcpConfig,
    nc: NcConfig,
    ch: ChannelModel,
    rounds: int,
) -> tuple[WindowTrace, ThroughputReport]:
    """Simulate coded TCP for a fixed number of rounds.

    Each round the sender ships a window's worth of fresh random
    combinations over the originals not yet seen by the receiver.  Any
    surviving combination is useful, so there are no duplicate-ACK events
    at all; the window grows by the seen-front advance per window.
    Goodput divides the delivered originals by the redundancy factor,
    which charges the coding overhead against the data rate.
    """
    if rounds < 1:
        raise ValueError("rounds must be positive")
    trace = _e2e_loop(tcp, nc, ch.open(), rounds, stop_on_exhaust=False)
    pps = trace.delivered_total / nc.redundancy_r / (rounds * tcp.rtt)
    report = ThroughputReport(
        pkts_per_sec=pps,
        mbps=pps * tcp.packet_bits / 1e6,
        params={"protocol": "e2e", "p": ch.p, "p_d": ch.p_d, "rounds": rounds,
                "seed": ch.seed, "redundancy_r": nc.redundancy_r},
    )
    return trace, report


def replay_loss_pattern(
    pattern: Sequence[int],
    protocol: str,
    tcp: TcpConfig,
    nc: NcConfig | None = None,
    rounds: int | None = None,
    seed: int = 0,
) -> WindowTrace:
    """Drive a protocol over a recorded loss pattern, one bit per packet.

    With ``rounds=None`` the run stops cleanly before the first round the
    pattern cannot cover; with an explicit round count, running out of
    pattern mid-round raises.  Both protocols consume one bit per
    transmitted packet, so the same pattern exercises both machines on
    identical loss sequences.
    """
    bits = np.asarray(pattern, dtype=np.int64)
    if bits.ndim != 1:
        raise ValueError("pattern must be a flat bit sequence")
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("pattern entries must be 0 or 1")
    code_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((seed, _ChannelStreams._CODE)))
    )
    streams = _PatternStreams(bits, code_rng)
    if protocol == "tcp":
        return _tcp_loop(tcp, streams, rounds, 0.0, stop_on_exhaust=rounds is None)
    if protocol == "e2e":
        if nc is None:
            raise ValueError("protocol 'e2e' needs an NcConfig")
        return _e2e_loop(tcp, nc, streams, rounds, stop_on_exhaust=rounds is None)
    raise ValueError(f"unknown protocol {protocol!r}, expected 'tcp' or 'e2e'")


def _tcp_loop(tcp, streams, rounds, t_p, stop_on_exhaust):
    w = 1.0
    sender_f = 0  # first index not yet cumulatively ACKed
    next_new = 0
    resend = False
    dup = 0
    silent = 0
    backoff = 1
    expected = 0  # receiver side
    trace = WindowTrace()
    r = 0
    while True:
        if rounds is not None and r >= rounds:
            break
        n_send = int(w)
        if stop_on_exhaust and streams.remaining < n_send:
            break
        r += 1
        w_start = w
        event = "none"

        if streams.down_round():
            silent += 1
            if _check_timeout(silent, backoff, tcp.to_rounds):
                event = "TO"
                w = 1.0
                backoff = min(_BACKOFF_CAP, 2 * backoff)
                silent = 0
                resend = True
            else:
                event = "DOWN"
            trace.rows.append(TraceRow(r, w_start, n_send, 0, sender_f, event))
            continue

        # go-back-N: a rewind abandons everything sent ahead of the front
        start = sender_f if resend else next_new
        resend = False
        next_new = start + n_send
        mask = streams.data_mask(n_send)

        # receiver: in-order accept, one cumulative ACK per arrival
        delivered = 0
        acks: list[int] = []
        positions: list[int] = []
        prev_pos = -1
        for pos in np.flatnonzero(mask):
            idx = start + int(pos)
            if idx == expected:
                expected += 1
                delivered += 1
                positions.append(int(pos))
            # anything else is duplicate or out of order: discarded
            acks.append(expected)

        send_t = (r - 1) * tcp.rtt
        for pos in positions:
            gap = pos - prev_pos
            prev_pos = pos
            trace.rtt_samples.append((send_t, send_t + tcp.rtt + t_p * gap))

        amask = streams.ack_mask(len(acks))
        new_acks = 0
        for a, ok in zip(acks, amask):
            if not ok:
                continue
            if a > sender_f:
                new_acks += a - sender_f
                sender_f = a
                dup = 0
            elif a == sender_f:
                dup += 1

        if new_acks:
            w = min(tcp.w_max, w + new_acks / w_start)
        if dup >= 3:
            event = "TD"
            w = max(1.0, w / 2.0)
            dup = 0
            resend = True
        else:
            if new_acks:
                silent = 0
                backoff = 1
            else:
                silent += 1
                if _check_timeout(silent, backoff, tcp.to_rounds):
                    event = "TO"
                    w = 1.0
                    backoff = min(_BACKOFF_CAP, 2 * backoff)
                    silent = 0
                    resend = True

        trace.rows.append(TraceRow(r, w_start, n_send, delivered, sender_f, event))
    return trace


def _e2e_loop(tcp, nc, streams, rounds, stop_on_exhaust):
    w = float(nc.w1)
    sender_f = 0  # latest seen-front value returned by an ACK
    dec = DecoderState(payload_len=8)
    silent = 0
    backoff = 1
    trace = WindowTrace()
    r = 0
    while True:
        if rounds is not None and r >= rounds:
            break
        n_send = int(w)
        if stop_on_exhaust and streams.remaining < n_send:
            break
        r += 1
        w_start = w
        event = "none"

        if streams.down_round():
            silent += 1
            if _check_timeout(silent, backoff, tcp.to_rounds):
                event = "TO"
                w = 1.0
                backoff = min(_BACKOFF_CAP, 2 * backoff)
                silent = 0
            else:
                event = "DOWN"
            trace.rows.append(TraceRow(r, w_start, n_send, 0, sender_f, event))
            continue

        base = sender_f
        originals = (
            np.arange(base, base + n_send, dtype=np.uint64)
            .astype(">u8")
            .view(np.uint8)
            .reshape(n_send, 8)
        )
        coeffs, payloads = encode_batch(streams.code_rng, base, originals, n_send)
        mask = streams.data_mask(n_send)
        front_before = dec.seen_front
        if mask.any():
            dec.receive_batch(base, coeffs[mask], payloads[mask])
        advance = dec.seen_front - front_before

        send_t = (r - 1) * tcp.rtt
        pos = np.flatnonzero(mask)
        if pos.size:
            gaps = np.diff(pos, prepend=-1)
            acks = send_t + tcp.rtt + nc.t_p * gaps
            trace.rtt_samples.extend(zip([send_t] * pos.size, acks.tolist()))

        # the round's ACK carries the receiver's seen front; growth follows
        # what the sender actually heard, not what the receiver saw
        prev_f = sender_f
        if streams.ack_mask(1)[0]:
            sender_f = dec.seen_front
        acked = sender_f - prev_f

        if acked:
            w = min(tcp.w_max, w + acked / w_start)
            silent = 0
            backoff = 1
        else:
            silent += 1
            if _check_timeout(silent, backoff, tcp.to_rounds):
                event = "TO"
                w = 1.0
                backoff = min(_BACKOFF_CAP, 2 * backoff)
                silent = 0

        # old state is never referenced again: the sender always codes at or
        # ahead of the last ACKed front
        dec.release(min(dec.seen_front, sender_f) - 2 * int(tcp.w_max))

        trace.rows.append(TraceRow(r, w_start, n_send, advance, sender_f, event))
    return trace
