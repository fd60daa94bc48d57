"""Round-based simulator tests.

The replay tests drive each protocol machine over hand-built loss
patterns where every ACK, window change, and recovery event can be
worked out on paper, and pin the full expected behavior.  The seeded
tests check determinism, stream isolation, and statistical agreement
with the closed-form models.
"""

import numpy as np
import pytest

from nctcp.model import NcConfig, TcpConfig, e2e_srtt
from nctcp.sim import (
    TRACE_FIELDS,
    ChannelModel,
    TraceRow,
    WindowTrace,
    measure_srtt,
    replay_loss_pattern,
    run_e2e,
    run_tcp,
)

# 15 clean bits ramp the window through rounds 1..5 (1+2+3+4+5 packets),
# then round six sends six packets with the third lost.  The two before
# the hole deliver; the three after re-ACK the hole three times.
RAMP_THEN_ONE_HOLE = [0] * 15 + [0, 0, 1, 0, 0, 0]

# Three more clean bits let the halved window (three packets) run one
# recovery round.
RAMP_HOLE_RECOVER = RAMP_THEN_ONE_HOLE + [0] * 3


def _events(trace):
    return [r.event for r in trace.rows]


class TestChannel:
    def test_same_seed_replays_identically(self):
        tcp = TcpConfig()
        ch = ChannelModel(p=0.1855, seed=5)
        t1, r1 = run_tcp(tcp, ch, 300)
        t2, r2 = run_tcp(tcp, ch, 300)
        assert t1.rows == t2.rows
        assert r1.mbps == r2.mbps

    def test_different_seeds_differ(self):
        tcp = TcpConfig()
        a = run_tcp(tcp, ChannelModel(p=0.1855, seed=1), 300)[1]
        b = run_tcp(tcp, ChannelModel(p=0.1855, seed=2), 300)[1]
        assert a.mbps != b.mbps

    @pytest.mark.parametrize("runner", ["tcp", "e2e"])
    def test_ack_stream_isolated_from_data(self, runner):
        # with p = 0 nothing is ever lost, but enabling ACK loss switches
        # the ACK draws on; identical traces prove the streams are separate
        tcp = TcpConfig()
        nc = NcConfig()

        def go(ack_flag):
            ch = ChannelModel(p=0.0, ack_loss_enabled=ack_flag, seed=3)
            if runner == "tcp":
                return run_tcp(tcp, ch, 60)[0]
            return run_e2e(tcp, nc, ch, 60)[0]

        assert go(False).rows == go(True).rows

    def test_rejects_bad_rates(self):
        with pytest.raises(ValueError):
            ChannelModel(p=1.0)
        with pytest.raises(ValueError):
            ChannelModel(p=0.1, p_d=1.0)

    def test_rejects_empty_run(self):
        with pytest.raises(ValueError):
            run_tcp(TcpConfig(), ChannelModel(p=0.1), 0)
        with pytest.raises(ValueError):
            run_e2e(TcpConfig(), NcConfig(), ChannelModel(p=0.1), 0)


class TestLossless:
    def test_tcp_ramp_and_total(self):
        tcp = TcpConfig()
        trace, report = run_tcp(tcp, ChannelModel(p=0.0), 200)
        assert _events(trace) == ["none"] * 200
        # window doubles nothing here: one ACK per delivered packet grows
        # the window by one per round until the cap
        assert [r.window for r in trace.rows[:5]] == [1.0, 2.0, 3.0, 4.0, 5.0]
        assert trace.rows[-1].window == 90.0
        assert trace.delivered_total == 13995
        assert trace.sent_total == 13995
        assert report.mbps == pytest.approx(13995 * 8000 / (200 * 0.8) / 1e6)

    def test_e2e_matches_tcp_exactly_without_redundancy(self):
        # seed chosen so every random coefficient batch has full rank; the
        # coded machine then walks in lockstep with the uncoded one
        tcp = TcpConfig()
        nc = NcConfig(redundancy_r=1.0)
        tcp_trace, tcp_rep = run_tcp(tcp, ChannelModel(p=0.0, seed=1), 200)
        e2e_trace, e2e_rep = run_e2e(tcp, nc, ChannelModel(p=0.0, seed=1), 200)
        assert e2e_trace.delivered_total == tcp_trace.delivered_total == 13995
        assert e2e_rep.mbps == tcp_rep.mbps
        assert [r.window for r in e2e_trace.rows] == [
            r.window for r in tcp_trace.rows
        ]

    def test_dependent_draws_only_defer_delivery(self):
        # seed 0 happens to draw one rank-deficient batch around round 163;
        # the shortfall stays in flight instead of being lost
        trace, _ = run_e2e(
            TcpConfig(), NcConfig(redundancy_r=1.0), ChannelModel(p=0.0, seed=0), 200
        )
        misses = [r.sent - r.delivered for r in trace.rows if r.delivered < r.sent]
        assert sum(misses) <= 5
        assert trace.delivered_total >= 13990

    def test_redundancy_charges_goodput(self):
        tcp = TcpConfig()
        plain = run_e2e(tcp, NcConfig(redundancy_r=1.0), ChannelModel(p=0.0), 100)[1]
        padded = run_e2e(tcp, NcConfig(redundancy_r=1.25), ChannelModel(p=0.0), 100)[1]
        assert padded.pkts_per_sec == pytest.approx(plain.pkts_per_sec / 1.25)


class TestTcpReplay:
    def test_single_hole_triggers_one_halving(self):
        trace = replay_loss_pattern(RAMP_THEN_ONE_HOLE, "tcp", TcpConfig())
        assert _events(trace) == ["none"] * 5 + ["TD"]
        before = trace.rows[5]
        assert before.window == 6.0
        assert before.sent == 6
        assert before.delivered == 2
        assert before.ack_front == 17

    def test_halving_is_exact(self):
        trace = replay_loss_pattern(RAMP_HOLE_RECOVER, "tcp", TcpConfig())
        # the two pre-hole ACKs grow 6 by 2/6 first, then the halving:
        # (6 + 2/6) / 2
        assert trace.rows[6].window == 3.1666666666666665
        assert trace.rows[6].event == "none"
        # rewound sender refills the hole, so all three resends deliver
        assert trace.rows[6].delivered == 3
        assert trace.rows[6].ack_front == 20

    def test_consumes_whole_pattern(self):
        trace = replay_loss_pattern(RAMP_THEN_ONE_HOLE, "tcp", TcpConfig())
        assert sum(r.sent for r in trace.rows) == len(RAMP_THEN_ONE_HOLE)

    def test_timeout_ladder_doubles_backoff(self):
        # base timeout two silent rounds; every packet lost for 14 rounds:
        # timeouts fire after 2, then 4, then 8 silent rounds
        tcp = TcpConfig(to_rounds=2.0)
        trace = replay_loss_pattern([1] * 14 + [0] * 6, "tcp", tcp)
        fired = [(r.round, r.event) for r in trace.rows if r.event != "none"]
        assert fired == [(2, "TO"), (6, "TO"), (14, "TO")]
        # each timeout resets the window to one
        assert all(r.window == 1.0 for r in trace.rows[:15])

    def test_backoff_resets_after_progress(self):
        # after the ladder, six clean bits restore progress; the next
        # all-loss stretch must time out at the base threshold again
        tcp = TcpConfig(to_rounds=2.0)
        trace = replay_loss_pattern([1] * 14 + [0] * 6 + [1] * 8, "tcp", tcp)
        assert trace.rows[14].delivered == 1  # recovery resend lands
        late = [(r.round, r.event) for r in trace.rows[14:] if r.event == "TO"]
        assert late == [(19, "TO")]

    def test_backoff_cap(self):
        # nine consecutive timeouts of a window-one sender; thresholds
        # double 2, 4, ..., 64 then stick at the cap
        tcp = TcpConfig(to_rounds=1.0)
        n = 1 + 2 + 4 + 8 + 16 + 32 + 64 + 64 + 64
        trace = replay_loss_pattern([1] * n, "tcp", tcp)
        fired = [r.round for r in trace.rows if r.event == "TO"]
        assert fired == [1, 3, 7, 15, 31, 63, 127, 191, 255]


class TestE2eReplay:
    def test_no_duplicate_ack_events_ever(self):
        trace = replay_loss_pattern(
            RAMP_THEN_ONE_HOLE, "e2e", TcpConfig(), nc=NcConfig()
        )
        assert _events(trace) == ["none"] * 6
        # any five of six combinations pin five originals
        assert trace.rows[5].delivered == 5
        assert trace.rows[5].ack_front == 20

    def test_same_pattern_same_budget_as_tcp(self):
        tcp_trace = replay_loss_pattern(RAMP_THEN_ONE_HOLE, "tcp", TcpConfig())
        e2e_trace = replay_loss_pattern(
            RAMP_THEN_ONE_HOLE, "e2e", TcpConfig(), nc=NcConfig()
        )
        assert len(tcp_trace.rows) == len(e2e_trace.rows) == 6
        assert [r.sent for r in tcp_trace.rows] == [r.sent for r in e2e_trace.rows]

    def test_every_coded_round_delivers_what_survives(self):
        trace = replay_loss_pattern(
            RAMP_THEN_ONE_HOLE, "e2e", TcpConfig(), nc=NcConfig()
        )
        losses_per_round = [0, 0, 0, 0, 0, 1]
        for row, lost in zip(trace.rows, losses_per_round):
            assert row.delivered == row.sent - lost

    def test_timeout_when_everything_is_lost(self):
        tcp = TcpConfig(to_rounds=2.0)
        trace = replay_loss_pattern([1] * 6, "e2e", tcp, nc=NcConfig())
        assert [r.event for r in trace.rows] == [
            "none", "TO", "none", "none", "none", "TO"
        ]


class TestReplayValidation:
    def test_auto_stop_before_uncoverable_round(self):
        trace = replay_loss_pattern([0, 0, 0], "tcp", TcpConfig())
        assert len(trace.rows) == 2
        assert trace.sent_total == 3

    def test_explicit_rounds_must_be_covered(self):
        with pytest.raises(ValueError, match="exhausted mid-round"):
            replay_loss_pattern([0, 0, 0], "tcp", TcpConfig(), rounds=5)

    def test_rejects_unknown_protocol(self):
        with pytest.raises(ValueError, match="unknown protocol"):
            replay_loss_pattern([0], "udp", TcpConfig())

    def test_e2e_needs_nc(self):
        with pytest.raises(ValueError, match="NcConfig"):
            replay_loss_pattern([0], "e2e", TcpConfig())

    def test_rejects_non_flat_or_non_binary(self):
        with pytest.raises(ValueError, match="flat"):
            replay_loss_pattern([[0, 1], [1, 0]], "tcp", TcpConfig())
        with pytest.raises(ValueError, match="0 or 1"):
            replay_loss_pattern([0, 2, 1], "tcp", TcpConfig())


class TestSrtt:
    def test_ewma_hand_computed(self):
        assert measure_srtt([(0.0, 1.0)]) == 1.0
        assert measure_srtt([(0.0, 1.0), (0.0, 2.0)]) == 1.125

    def test_no_samples_raises(self):
        with pytest.raises(ValueError, match="no RTT samples"):
            measure_srtt([])

    def test_tcp_lossless_samples_are_flat(self):
        tcp = TcpConfig()
        trace, _ = run_tcp(tcp, ChannelModel(p=0.0), 50, t_p=0.008)
        assert trace.rtt_samples
        assert all(
            abs((ack - send) - 0.808) < 1e-9 for send, ack in trace.rtt_samples
        )

    def test_e2e_lossless_samples_are_flat(self):
        trace, _ = run_e2e(TcpConfig(), NcConfig(), ChannelModel(p=0.0), 50)
        rtts = {round(ack - send, 12) for send, ack in trace.rtt_samples}
        assert rtts == {0.808}

    def test_e2e_measured_tracks_model_under_loss(self):
        tcp = TcpConfig()
        trace, _ = run_e2e(tcp, NcConfig(), ChannelModel(p=0.1855, seed=0), 300)
        measured = measure_srtt(trace.rtt_samples)
        model = e2e_srtt(tcp.rtt, 0.008, 0.1855)
        assert abs(measured - model) / model < 0.15


class TestStatisticalAgreement:
    def test_tcp_throughput_near_model(self):
        from nctcp.model import tcp_avg_throughput

        tcp = TcpConfig()
        p = 0.058663449375
        sims = [
            run_tcp(tcp, ChannelModel(p=p, seed=s), 1250)[1].mbps
            for s in range(10)
        ]
        ratio = np.mean(sims) / tcp_avg_throughput(p, tcp).mbps
        assert 0.5 < ratio < 2.0

    def test_e2e_window_slope_matches_survivor_rate(self):
        tcp = TcpConfig()
        nc = NcConfig()
        for p in (0.058663449375, 0.1):
            slopes = []
            for seed in range(10):
                trace, _ = run_e2e(tcp, nc, ChannelModel(p=p, seed=seed), 120)
                ws = np.array([r.window for r in trace.rows])
                ramp_end = int(np.argmax(ws >= tcp.w_max)) or len(ws)
                seg = ws[5 : ramp_end - 5]
                x = np.arange(seg.size)
                slopes.append(np.polyfit(x, seg, 1)[0])
            assert abs(np.mean(slopes) - (1.0 - p)) < 0.05


class TestBlackouts:
    def test_down_rounds_deliver_nothing(self):
        tcp = TcpConfig()
        trace, _ = run_tcp(tcp, ChannelModel(p=0.05, p_d=0.4, seed=7), 200)
        downs = [r for r in trace.rows if r.event == "DOWN"]
        assert downs
        assert all(r.delivered == 0 for r in downs)
        assert all(r.sent == int(r.window) for r in downs)

    def test_sustained_blackout_times_out(self):
        tcp = TcpConfig()
        trace, _ = run_tcp(tcp, ChannelModel(p=0.05, p_d=0.4, seed=7), 200)
        to_rows = [i for i, r in enumerate(trace.rows) if r.event == "TO"]
        assert to_rows
        for i in to_rows:
            if i + 1 < len(trace.rows):
                assert trace.rows[i + 1].window == 1.0

    def test_e2e_front_never_regresses(self):
        trace, _ = run_e2e(
            TcpConfig(), NcConfig(), ChannelModel(p=0.1, p_d=0.3, seed=2), 200
        )
        fronts = [r.ack_front for r in trace.rows]
        assert all(b >= a for a, b in zip(fronts, fronts[1:]))

    def test_e2e_conservation(self):
        trace, _ = run_e2e(
            TcpConfig(), NcConfig(), ChannelModel(p=0.1855, seed=4), 250
        )
        assert all(r.delivered <= r.sent for r in trace.rows)
        assert trace.delivered_total <= trace.sent_total
        # with ACK loss off the sender front tracks deliveries exactly
        assert trace.rows[-1].ack_front == trace.delivered_total


class TestTraceCsv:
    def test_header_and_shape(self, tmp_path):
        trace = replay_loss_pattern(RAMP_HOLE_RECOVER, "tcp", TcpConfig())
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(TRACE_FIELDS)
        assert len(lines) == 1 + len(trace.rows)
        assert lines[6].split(",") == [
            "6", "6.000000", "6", "2", "17", "TD"
        ]

    def test_window_formatting(self, tmp_path):
        trace = WindowTrace(rows=[TraceRow(1, 3.1666666666666665, 3, 3, 20, "none")])
        path = tmp_path / "one.csv"
        trace.write_csv(path)
        assert path.read_text().splitlines()[1] == "1,3.166667,3,3,20,none"
