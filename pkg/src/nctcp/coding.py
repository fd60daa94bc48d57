"""Random linear coding over GF(256).

The sender draws uniform random coefficients over a window of original
packets and ships the combinations; the receiver runs incremental Gaussian
elimination and tracks how far the prefix of originals is pinned down.
Everything works in absolute packet indices so a long-lived stream can
release old state and keep going.
"""

from __future__ import annotations

import struct
from bisect import bisect_left, insort
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gf256 import MUL, inv, mul_mat, mul_vec

__all__ = [
    "CodedPacket",
    "DecoderState",
    "encode",
    "encode_batch",
    "linear_combine",
]

_HEADER = struct.Struct(">IH")  # base index, coefficient count

_MULF = MUL.reshape(-1)


def _rank1_xor(dst: np.ndarray, f: np.ndarray, row: np.ndarray) -> None:
    # dst ^= outer(f, row) over GF(256), in place.  A flat take through the
    # product table beats broadcast fancy indexing on this hot path.
    idx = (f.astype(np.intp)[:, None] << 8) | row
    np.bitwise_xor(dst, _MULF.take(idx), out=dst)


@dataclass(frozen=True)
class CodedPacket:
    """One coded transmission: a coefficient vector over a window of
    originals, starting at ``base_index``, plus the mixed payload."""

    base_index: int
    coeffs: np.ndarray
    payload: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.uint8))
        object.__setattr__(self, "payload", np.asarray(self.payload, dtype=np.uint8))
        if self.base_index < 0:
            raise ValueError("base_index cannot be negative")
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("coeffs must be a nonempty vector")
        if self.coeffs.size > 0xFFFF:
            raise ValueError("coefficient vector too long for the wire header")
        if self.payload.ndim != 1:
            raise ValueError("payload must be a flat byte vector")

    def to_bytes(self) -> bytes:
        return (
            _HEADER.pack(self.base_index, self.coeffs.size)
            + self.coeffs.tobytes()
            + self.payload.tobytes()
        )

    @classmethod
    def from_bytes(cls, buf: bytes) -> "CodedPacket":
        if len(buf) < _HEADER.size:
            raise ValueError(f"truncated packet: {len(buf)} bytes")
        base, count = _HEADER.unpack_from(buf)
        if len(buf) < _HEADER.size + count:
            raise ValueError("truncated packet: coefficient block cut short")
        coeffs = np.frombuffer(buf, dtype=np.uint8, count=count, offset=_HEADER.size)
        payload = np.frombuffer(buf, dtype=np.uint8, offset=_HEADER.size + count)
        return cls(base, coeffs.copy(), payload.copy())


def encode_batch(
    rng: np.random.Generator,
    base_index: int,
    originals: np.ndarray,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` random combinations of the originals (one per row).

    Returns (coeffs, payloads).  All-zero coefficient vectors carry
    nothing, so they are redrawn.
    """
    arr = np.asarray(originals, dtype=np.uint8)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("originals must be a nonempty matrix, one packet per row")
    if base_index < 0:
        raise ValueError("base_index cannot be negative")
    w = arr.shape[0]
    coeffs = rng.integers(0, 256, size=(count, w), dtype=np.uint8)
    while True:
        dead = ~coeffs.any(axis=1)
        if not dead.any():
            break
        coeffs[dead] = rng.integers(0, 256, size=(int(dead.sum()), w), dtype=np.uint8)
    return coeffs, mul_mat(coeffs, arr)


def encode(
    rng: np.random.Generator, base_index: int, originals: np.ndarray
) -> CodedPacket:
    """One random combination of the originals as a wire-ready packet."""
    coeffs, payloads = encode_batch(rng, base_index, originals, 1)
    return CodedPacket(base_index, coeffs[0], payloads[0])


def linear_combine(
    packets: Sequence[CodedPacket], weights: Sequence[int]
) -> CodedPacket:
    """Weighted sum of coded packets, re-expressed over the union support.

    Recoding at a relay is exactly this: the output is again a linear
    combination of the originals, with coefficients anyone can track.
    """
    if len(packets) == 0:
        raise ValueError("need at least one packet")
    if len(weights) != len(packets):
        raise ValueError("one weight per packet")
    plen = packets[0].payload.size
    if any(p.payload.size != plen for p in packets):
        raise ValueError("payload lengths differ")
    lo = min(p.base_index for p in packets)
    hi = max(p.base_index + p.coeffs.size for p in packets)
    coeffs = np.zeros(hi - lo, dtype=np.uint8)
    payload = np.zeros(plen, dtype=np.uint8)
    for pkt, wgt in zip(packets, weights):
        if wgt == 0:
            continue
        off = pkt.base_index - lo
        seg = coeffs[off : off + pkt.coeffs.size]
        np.bitwise_xor(seg, mul_vec(wgt, pkt.coeffs), out=seg)
        np.bitwise_xor(payload, mul_vec(wgt, pkt.payload), out=payload)
    return CodedPacket(lo, coeffs, payload)


class DecoderState:
    """Incremental Gaussian elimination over a stream of coded packets.

    Stored rows are reduced against earlier pivots on arrival and never
    modified afterwards, so each row's leftmost nonzero coefficient is its
    pivot for good.  That makes ``release`` a plain cut with no fixups.

    ``seen_front`` is the first original index not yet pinned down;
    everything below it is recoverable.  Packets whose support starts
    below the released cutoff are rejected, so callers should release with
    a margin of a few windows behind the front.
    """

    def __init__(self, payload_len: int, origin: int = 0) -> None:
        if payload_len < 0:
            raise ValueError("payload_len cannot be negative")
        self.payload_len = payload_len
        self.origin = origin
        self._cap = 0  # coefficient columns currently allocated
        self._rows = 0
        # one matrix holds both halves of each row: coefficient columns
        # [0, cap) then payload columns [cap, cap + payload_len)
        self._M = np.zeros((0, payload_len), dtype=np.uint8)
        self._pivot_cols: list[int] = []  # sorted, relative to origin
        self._pivot_row: dict[int, int] = {}
        self._row_pivot: list[int] = []
        self._front_rel = 0

    @property
    def rank(self) -> int:
        return self._rows

    @property
    def seen_front(self) -> int:
        return self.origin + self._front_rel

    def _ensure_cols(self, end_rel: int) -> None:
        if end_rel <= self._cap:
            return
        pad = np.zeros((self._rows, end_rel - self._cap), dtype=np.uint8)
        self._M = np.hstack([self._M[:, : self._cap], pad, self._M[:, self._cap :]])
        self._cap = end_rel

    def receive(self, pkt: CodedPacket) -> bool:
        """Fold one packet in.  True if it raised the rank."""
        if self.payload_len and pkt.payload.size != self.payload_len:
            raise ValueError("payload length mismatch")
        payloads = pkt.payload[None, :] if self.payload_len else None
        return self.receive_batch(pkt.base_index, pkt.coeffs[None, :], payloads) == 1

    def receive_batch(
        self,
        base_index: int,
        coeffs: np.ndarray,
        payloads: np.ndarray | None = None,
    ) -> int:
        """Fold in a batch of combinations sharing one window start.

        ``coeffs`` is (n, w); ``payloads`` is (n, payload_len) and required
        whenever the decoder carries payloads.  Returns how many of the
        batch were innovative, which is the rank increase.
        """
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.uint8))
        n, w = coeffs.shape
        if n == 0 or w == 0:
            return 0
        if base_index < self.origin:
            raise ValueError(
                f"window start {base_index} reaches below released state "
                f"(origin {self.origin})"
            )
        plen = self.payload_len
        if plen:
            if payloads is None:
                raise ValueError("decoder carries payloads, batch must too")
            payloads = np.atleast_2d(np.asarray(payloads, dtype=np.uint8))
            if payloads.shape != (n, plen):
                raise ValueError(f"payloads must be shaped ({n}, {plen})")
        rel = base_index - self.origin
        self._ensure_cols(rel + w)
        cap = self._cap

        # work frame: columns [rel, cap) of the decoder, then the payload
        work = np.zeros((n, cap - rel + plen), dtype=np.uint8)
        work[:, :w] = coeffs
        if plen:
            work[:, cap - rel :] = payloads

        # pass 1: cancel stored pivots, ascending; pivot rows are zero left
        # of their pivot so this never reintroduces a cleared column
        for pc in self._pivot_cols[bisect_left(self._pivot_cols, rel) :]:
            c = pc - rel
            f = work[:, c]
            if not f.any():
                continue
            _rank1_xor(work[:, c:], f, self._M[self._pivot_row[pc], pc:])

        # pass 2: column-major scan; the first still-alive row with a
        # nonzero entry takes the column.  Which row wins a contested
        # column is an arbitrary deterministic tiebreak: the pivot-column
        # profile depends only on the row space.  Pivoted rows are parked
        # at the top so the elimination touches a shrinking block.
        k = 0
        placed: list[int] = []  # relative pivot columns, in park order
        for c in range(cap - rel):
            col = work[k:, c]
            nz = col != 0
            j = int(nz.argmax())
            if not nz[j]:
                continue
            if j:
                # rows below k are zero left of c, so swapping tails is a
                # full row swap
                tmp = work[k + j, c:].copy()
                work[k + j, c:] = work[k, c:]
                work[k, c:] = tmp
            s = inv(int(work[k, c]))
            if s != 1:
                work[k, c:] = mul_vec(s, work[k, c:])
            rest = work[k + 1 :, c:]
            if rest.size:
                f = rest[:, 0]
                if f.any():
                    _rank1_xor(rest, f, work[k, c:])
            placed.append(c + rel)
            k += 1
            if k == n:
                break
        if not placed:
            return 0

        block = np.zeros((k, cap + plen), dtype=np.uint8)
        for i, pc in enumerate(placed):
            block[i, pc:] = work[i, pc - rel :]
        self._M = np.vstack([self._M, block])
        for i, pc in enumerate(placed):
            self._pivot_row[pc] = self._rows + i
            insort(self._pivot_cols, pc)
            self._row_pivot.append(pc)
        self._rows += k
        while self._front_rel in self._pivot_row:
            self._front_rel += 1
        return len(placed)

    def innovative_mask(self, base_index: int, coeffs: np.ndarray) -> np.ndarray:
        """Which candidate combinations would raise the rank, each judged
        against the current state alone.  Nothing is folded in."""
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.uint8))
        n, w = coeffs.shape
        if base_index < self.origin:
            raise ValueError("window start reaches below released state")
        rel = base_index - self.origin
        self._ensure_cols(rel + w)
        work = np.zeros((n, self._cap - rel), dtype=np.uint8)
        work[:, :w] = coeffs
        for pc in self._pivot_cols[bisect_left(self._pivot_cols, rel) :]:
            c = pc - rel
            f = work[:, c]
            if not f.any():
                continue
            _rank1_xor(work[:, c:], f, self._M[self._pivot_row[pc], pc : self._cap])
        return work.any(axis=1)

    def decode(self) -> dict[int, bytes]:
        """Recover every original currently pinned down.

        Back substitution runs on a copy; decoder state is untouched.
        Indices below the released cutoff are gone and never returned.
        """
        if self._rows == 0 or not self.payload_len:
            return {}
        m = self._M.copy()
        cap = self._cap
        for pc in reversed(self._pivot_cols):
            r = self._pivot_row[pc]
            col = m[:, pc].copy()
            col[r] = 0
            nz = np.flatnonzero(col)
            if nz.size:
                sub = m[nz, pc:]
                _rank1_xor(sub, col[nz], m[r, pc:])
                m[nz, pc:] = sub
        out: dict[int, bytes] = {}
        for pc in self._pivot_cols:
            r = self._pivot_row[pc]
            if np.count_nonzero(m[r, :cap]) == 1:
                out[self.origin + pc] = m[r, cap:].tobytes()
        return out

    def release(self, upto: int) -> None:
        """Forget all state below ``upto`` (clamped to the decoded front).

        Rows never have support left of their pivot, so the cut drops
        whole rows and columns with no arithmetic.
        """
        upto = min(upto, self.seen_front)
        if upto <= self.origin:
            return
        cut = upto - self.origin
        keep = [i for i, pc in enumerate(self._row_pivot) if pc >= cut]
        self._M = self._M[keep][:, cut:].copy()
        self._cap -= cut
        self._rows = len(keep)
        self._row_pivot = [pc - cut for pc in self._row_pivot if pc >= cut]
        self._pivot_cols = [pc - cut for pc in self._pivot_cols if pc >= cut]
        self._pivot_row = {pc: i for i, pc in enumerate(self._row_pivot)}
        self._front_rel -= cut
        self.origin = upto
