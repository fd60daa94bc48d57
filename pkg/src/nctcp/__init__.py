"""Throughput models, simulators, and a comparison harness for standard
TCP versus end-to-end coded TCP over lossy paths."""

from .coding import CodedPacket, DecoderState, encode, encode_batch, linear_combine
from .harness import ExperimentSpec, analyze, compare, simulate
from .model import (
    ErasureParams,
    NcConfig,
    TcpConfig,
    ThroughputReport,
    combined_throughput,
    downstate_expectations,
    e2e_avg_throughput,
    e2e_expected_transmissions,
    e2e_expected_window,
    e2e_round_throughput,
    e2e_srtt,
    effective_loss,
    tcp_avg_throughput,
    tcp_expected_rounds,
    tcp_expected_td_packets,
    tcp_expected_window,
    tcp_td_throughput,
    tcp_timeout_duration,
    tcp_timeout_prob,
)
from .sim import (
    ChannelModel,
    TraceRow,
    WindowTrace,
    measure_srtt,
    replay_loss_pattern,
    run_e2e,
    run_tcp,
)

__version__ = "0.1.0"
