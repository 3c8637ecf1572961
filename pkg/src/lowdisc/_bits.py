"""Packed bit-vector helpers.

Member sets are stored as rows of little-endian uint64 words: element e lives
in word e >> 6, bit e & 63. Padding bits past n are always zero; every
constructor below maintains that invariant so popcounts and row hashes can
skip masking.
"""

from __future__ import annotations

import numpy as np

WORD_BITS = 64


def n_words(n: int) -> int:
    return (n + WORD_BITS - 1) // WORD_BITS


def tail_mask(n: int) -> int:
    """Mask of valid bits in the last word (all ones when n is a multiple of 64)."""
    r = n % WORD_BITS
    return (1 << r) - 1 if r else (1 << WORD_BITS) - 1


def zeros(m: int, n: int) -> np.ndarray:
    return np.zeros((m, n_words(n)), dtype=np.uint64)


def pack_indices(n: int, sets: list[list[int]]) -> np.ndarray:
    """Pack index lists into a words matrix. Indices must be in [0, n)."""
    out = zeros(len(sets), n)
    for r, idx in enumerate(sets):
        if len(idx) == 0:
            continue
        a = np.asarray(idx, dtype=np.int64)
        if a.min() < 0 or a.max() >= n:
            raise ValueError(f"set {r}: index out of range for n={n}")
        np.bitwise_or.at(out[r], a >> 6, np.uint64(1) << (a & 63).astype(np.uint64))
    return out


def pack_bool(mat: np.ndarray) -> np.ndarray:
    """Pack a boolean matrix [m, n] into words [m, ceil(n/64)]."""
    m, n = mat.shape
    byts = np.packbits(mat, axis=1, bitorder="little")
    w = n_words(n)
    padded = np.zeros((m, w * 8), dtype=np.uint8)
    padded[:, : byts.shape[1]] = byts
    return padded.view("<u8").copy()

def unpack_bool(words: np.ndarray, n: int) -> np.ndarray:
    """Inverse of pack_bool; returns boolean matrix [m, n]."""
    if words.shape[0] == 0:
        return np.zeros((0, n), dtype=bool)
    byts = words.astype("<u8", copy=False).view(np.uint8).reshape(words.shape[0], -1)
    bits = np.unpackbits(byts, axis=1, bitorder="little")
    return bits[:, :n].astype(bool)


def popcounts(words: np.ndarray) -> np.ndarray:
    """Per-row popcount as int64."""
    return np.bitwise_count(words).sum(axis=1, dtype=np.int64)


def row_indices(words: np.ndarray, row: int, n: int) -> np.ndarray:
    """Sorted element indices of one row."""
    byts = words[row : row + 1].astype("<u8", copy=False).view(np.uint8).reshape(1, -1)
    bits = np.unpackbits(byts, axis=1, bitorder="little")[0, :n]
    return np.nonzero(bits)[0].astype(np.int64)


def rows_to_bytes(words: np.ndarray, n: int) -> np.ndarray:
    """Rows as ceil(n/8)-byte records (LSB-first), the wire format."""
    byts = words.astype("<u8", copy=False).view(np.uint8).reshape(words.shape[0], -1)
    return byts[:, : (n + 7) // 8].copy()


def bytes_to_rows(buf: bytes, m: int, n: int) -> np.ndarray:
    per = (n + 7) // 8
    raw = np.frombuffer(buf, dtype=np.uint8, count=m * per).reshape(m, per)
    w = n_words(n)
    padded = np.zeros((m, w * 8), dtype=np.uint8)
    padded[:, :per] = raw
    words = padded.view("<u8").copy()
    # reject set bits past n rather than silently masking
    tm = np.uint64(tail_mask(n))
    if n % WORD_BITS and words.shape[1] and np.any(words[:, -1] & ~tm):
        raise ValueError("padding bits past n are set")
    return words


def dedup(words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows in first-occurrence order.

    Returns (kept_row_indices, inverse) where inverse[r] is the position of
    row r's representative in the kept list.
    """
    m = words.shape[0]
    if m == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    voided = np.ascontiguousarray(words).view(
        np.dtype((np.void, words.dtype.itemsize * words.shape[1]))
    ).ravel()
    _, first, inv = np.unique(voided, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")  # first-occurrence order
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return first[order].astype(np.int64), rank[inv].astype(np.int64)


def select_columns(words: np.ndarray, n: int, cols: np.ndarray, block: int = 1 << 15) -> np.ndarray:
    """Restrict every row to the given columns (new width = len(cols)).

    Works block-wise so the unpacked boolean slab stays small.
    """
    m = words.shape[0]
    cols = np.asarray(cols, dtype=np.int64)
    out = zeros(m, len(cols))
    for lo in range(0, m, block):
        hi = min(lo + block, m)
        sub = unpack_bool(words[lo:hi], n)[:, cols]
        out[lo:hi] = pack_bool(sub)
    return out
