"""Arithmetic over GF(2^8) with log/exp tables.

Field polynomial is x^8 + x^4 + x^3 + x^2 + 1 (0x11D), generator 2.
Addition is XOR.  The exp table is stored doubled so products of logs can
index it without a modulo.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "POLY",
    "EXP",
    "LOG",
    "MUL",
    "add",
    "mul",
    "inv",
    "mul_vec",
    "addmul_vec",
    "mul_mat",
]

POLY = 0x11D


def _build_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    exp = np.zeros(510, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int16)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= POLY
    exp[255:510] = exp[0:255]
    log[0] = -1  # sentinel, never a valid index on the zero-masked paths
    # full 256x256 product table; one gather replaces the log/exp chain on
    # the hot elimination paths, and rows 0/column 0 handle zeros for free
    full = exp[log[:, None] + log[None, :]].copy()
    full[0, :] = 0
    full[:, 0] = 0
    return exp, log, full


EXP, LOG, MUL = _build_tables()


def add(a: int, b: int) -> int:
    return a ^ b


def mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(EXP[int(LOG[a]) + int(LOG[b])])


def inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(EXP[255 - int(LOG[a])])


def mul_vec(scalar: int, vec: np.ndarray) -> np.ndarray:
    """scalar * vec elementwise.  vec is uint8; returns a new uint8 array."""
    if scalar == 0:
        return np.zeros_like(vec)
    if scalar == 1:
        return vec.copy()
    return MUL[scalar, vec]


def addmul_vec(dst: np.ndarray, scalar: int, vec: np.ndarray) -> None:
    """dst ^= scalar * vec, in place."""
    if scalar == 0:
        return
    if scalar == 1:
        np.bitwise_xor(dst, vec, out=dst)
        return
    np.bitwise_xor(dst, mul_vec(scalar, vec), out=dst)


def mul_mat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(256).

    Shapes follow numpy matmul: (..., n, k) @ (..., k, m) -> (..., n, m).
    Implemented with one broadcast table lookup and an XOR reduction, so
    batched 3-d inputs stay vectorized.
    """
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    # terms[..., n, k, m] = a[..., n, k] * b[..., k, m]
    idx = (a.astype(np.intp)[..., :, :, None] << 8) | b[..., None, :, :]
    return np.bitwise_xor.reduce(MUL.reshape(-1).take(idx), axis=-2)
