"""Core set-system types and operations.

A set system is a ground set {0, .., n-1} plus an ordered list of member
sets stored as packed bit vectors (rows of little-endian uint64 words).
Duplicate member sets are legal at ingestion and preserved; deduplication
is an explicit operation. The empty set is a legal member.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _bits
from ._kernels import sym_diff_rows

MAGIC = b"SSYS"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GroundSet:
    """Ground set of size n with optional element labels."""

    n: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ground set must have at least one element")
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError("labels length must equal n")


class SetSystem:
    """Ordered family of subsets of {0, .., n-1} as a packed bit matrix."""

    def __init__(self, n: int, words: np.ndarray, labels: list[str] | None = None):
        if n < 1:
            raise ValueError("n must be >= 1")
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[1] != _bits.n_words(n):
            raise ValueError("words matrix has wrong shape for n")
        if n % 64 and words.shape[0]:
            tm = np.uint64(_bits.tail_mask(n))
            if np.any(words[:, -1] & ~tm):
                raise ValueError("padding bits past n are set")
        if labels is not None and len(labels) != words.shape[0]:
            raise ValueError("labels length must equal set count")
        self.n = n
        self.words = words
        self.labels = labels
        self._sizes: np.ndarray | None = None

    @classmethod
    def from_sets(cls, n: int, sets: list[list[int]], labels: list[str] | None = None) -> "SetSystem":
        return cls(n, _bits.pack_indices(n, sets), labels)

    @classmethod
    def from_bool(cls, mat: np.ndarray, labels: list[str] | None = None) -> "SetSystem":
        mat = np.asarray(mat, dtype=bool)
        return cls(mat.shape[1], _bits.pack_bool(mat), labels)

    @property
    def m(self) -> int:
        return self.words.shape[0]

    def __len__(self) -> int:
        return self.m

    @property
    def sizes(self) -> np.ndarray:
        """Per-set cardinalities (cached)."""
        if self._sizes is None:
            self._sizes = _bits.popcounts(self.words)
        return self._sizes

    def set_indices(self, i: int) -> np.ndarray:
        return _bits.row_indices(self.words, i, self.n)

    def as_lists(self) -> list[list[int]]:
        return [self.set_indices(i).tolist() for i in range(self.m)]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(MAGIC)
        h.update(self.n.to_bytes(8, "little"))
        h.update(_bits.rows_to_bytes(self.words, self.n).tobytes())
        return h.hexdigest()

    def __repr__(self) -> str:
        return f"SetSystem(n={self.n}, m={self.m})"


@dataclass
class Coloring:
    """Element coloring with values in {-1, 0, +1}; 0 means uncolored."""

    values: np.ndarray
    seed: int | None = None
    params_hash: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int8)
        if self.values.ndim != 1:
            raise ValueError("coloring must be a vector")
        if not np.all(np.isin(self.values, (-1, 0, 1))):
            raise ValueError("coloring values must be in {-1, 0, +1}")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def is_full(self) -> bool:
        return bool(np.all(self.values != 0))

    @property
    def colored_count(self) -> int:
        return int(np.count_nonzero(self.values))


# ---------------------------------------------------------------------------
# elementary operations


def sym_diff_size(sys: SetSystem, i: int, j: int) -> int:
    """|S_i symmetric-difference S_j|, the packing metric."""
    return int(sym_diff_rows(sys.words, i, j))


def measure(sys: SetSystem, i: int) -> Fraction:
    """Normalized measure |S_i| / n as an exact rational."""
    return Fraction(int(sys.sizes[i]), sys.n)


def project(sys: SetSystem, elements: np.ndarray | list[int]) -> tuple[SetSystem, np.ndarray]:
    """Restrict the system to a subset of the ground set.

    Returns (projected system of distinct restrictions in first-occurrence
    order, witness array mapping each output set to an input set id whose
    restriction it is).
    """
    cols = np.asarray(sorted(set(int(e) for e in elements)), dtype=np.int64)
    if len(cols) == 0:
        raise ValueError("projection target must be nonempty")
    if cols[0] < 0 or cols[-1] >= sys.n:
        raise ValueError("projection element out of range")
    sub = _bits.select_columns(sys.words, sys.n, cols)
    keep, _ = _bits.dedup(sub)
    labels = None
    if sys.labels is not None:
        labels = [sys.labels[i] for i in keep]
    return SetSystem(len(cols), sub[keep], labels), keep


def dedup(sys: SetSystem) -> tuple[SetSystem, np.ndarray]:
    """Distinct member sets in first-occurrence order, plus the witness ids."""
    keep, _ = _bits.dedup(sys.words)
    labels = [sys.labels[i] for i in keep] if sys.labels is not None else None
    return SetSystem(sys.n, sys.words[keep], labels), keep


def shatter_profile(sys: SetSystem, m: int, trials: int = 64, seed: int = 0) -> int:
    """Sampled lower bound on the shatter function pi(m).

    Draws `trials` random m-subsets of the ground set and returns the largest
    number of distinct restrictions seen. Always a lower bound on the true
    maximum over m-subsets.
    """
    if not 1 <= m <= sys.n:
        raise ValueError("m out of range")
    rng = np.random.Generator(np.random.PCG64(seed))
    best = 0
    for _ in range(trials):
        y = rng.choice(sys.n, size=m, replace=False)
        proj, _ = project(sys, y)
        best = max(best, proj.m)
    return best


def size_sensitive_count(sys: SetSystem, elements: np.ndarray | list[int], k: int) -> int:
    """Number of distinct restrictions to `elements` with at most k elements."""
    proj, _ = project(sys, elements)
    return int(np.count_nonzero(proj.sizes <= k))


def chi_of_set(sys: SetSystem, i: int, coloring: Coloring) -> int:
    """Signed sum of the coloring over set i."""
    if coloring.n != sys.n:
        raise ValueError("coloring size mismatch")
    plus = _bits.pack_bool((coloring.values == 1)[None, :])[0]
    minus = _bits.pack_bool((coloring.values == -1)[None, :])[0]
    row = sys.words[i]
    p = int(np.bitwise_count(row & plus).sum())
    q = int(np.bitwise_count(row & minus).sum())
    return p - q


def chi_vector(sys: SetSystem, coloring: Coloring) -> np.ndarray:
    """chi(S) for every set as int64, uncolored elements contributing 0."""
    if coloring.n != sys.n:
        raise ValueError("coloring size mismatch")
    plus = _bits.pack_bool((coloring.values == 1)[None, :])[0]
    minus = _bits.pack_bool((coloring.values == -1)[None, :])[0]
    p = np.bitwise_count(sys.words & plus).sum(axis=1, dtype=np.int64)
    q = np.bitwise_count(sys.words & minus).sum(axis=1, dtype=np.int64)
    return p - q


@dataclass
class DiscrepancyReport:
    value: int
    argmax: int | None
    chi: np.ndarray = field(repr=False)


def discrepancy(sys: SetSystem, coloring: Coloring) -> DiscrepancyReport:
    """max_S |chi(S)| with the smallest-id argmax; 0 on an empty system."""
    if sys.m == 0:
        return DiscrepancyReport(0, None, np.zeros(0, dtype=np.int64))
    chi = chi_vector(sys, coloring)
    a = np.abs(chi)
    arg = int(np.argmax(a))  # argmax returns the first (smallest id) maximum
    return DiscrepancyReport(int(a[arg]), arg, chi)


# ---------------------------------------------------------------------------
# serialization


def to_json_dict(sys: SetSystem) -> dict:
    out: dict = {"n": sys.n, "sets": sys.as_lists()}
    if sys.labels is not None:
        out["labels"] = list(sys.labels)
    return out


def save_json(sys: SetSystem, path: str) -> None:
    with open(path, "w") as f:
        json.dump(to_json_dict(sys), f, separators=(",", ":"), sort_keys=True)
        f.write("\n")


def from_json_dict(doc: dict) -> SetSystem:
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise ValueError("bad n")
    sets = doc["sets"]
    for s in sets:
        if any(not isinstance(e, int) for e in s):
            raise ValueError("set indices must be integers")
        if sorted(s) != s or len(set(s)) != len(s):
            raise ValueError("set indices must be strictly ascending")
    labels = doc.get("labels")
    return SetSystem.from_sets(n, sets, labels)


def load_json(path: str) -> SetSystem:
    with open(path) as f:
        return from_json_dict(json.load(f))


def save_binary(sys: SetSystem, path: str) -> None:
    """Binary format: magic 'SSYS', version byte, LE u32 n and m, then m rows
    of ceil(n/8) bytes, LSB-first within each byte."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(bytes([FORMAT_VERSION]))
        f.write(np.uint32(sys.n).tobytes())
        f.write(np.uint32(sys.m).tobytes())
        f.write(_bits.rows_to_bytes(sys.words, sys.n).tobytes())


def load_binary(path: str) -> SetSystem:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValueError("not a set-system file (bad magic)")
    if blob[4] != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {blob[4]}")
    n = int(np.frombuffer(blob, np.uint32, 1, 5)[0])
    m = int(np.frombuffer(blob, np.uint32, 1, 9)[0])
    if n < 1:
        raise ValueError("bad n")
    per = (n + 7) // 8
    body = blob[13:]
    if len(body) != m * per:
        raise ValueError("truncated or oversized body")
    return SetSystem(n, _bits.bytes_to_rows(body, m, n))


def save_coloring(coloring: Coloring, path: str) -> None:
    """Text format: header line, then one value per element line."""
    seed = "none" if coloring.seed is None else str(coloring.seed)
    with open(path, "w") as f:
        f.write(f"# coloring v1 n={coloring.n} seed={seed} params={coloring.params_hash or 'none'}\n")
        for v in coloring.values:
            f.write(f"{int(v)}\n")


def load_coloring(path: str) -> Coloring:
    with open(path) as f:
        header = f.readline()
        if not header.startswith("# coloring v1 "):
            raise ValueError("bad coloring header")
        fields = dict(tok.split("=", 1) for tok in header[2:].split() if "=" in tok)
        vals = [int(line) for line in f if line.strip()]
    n = int(fields["n"])
    if len(vals) != n:
        raise ValueError("value count does not match header n")
    seed = None if fields.get("seed") == "none" else int(fields["seed"])
    ph = fields.get("params", "none")
    return Coloring(np.array(vals, dtype=np.int8), seed=seed, params_hash="" if ph == "none" else ph)
