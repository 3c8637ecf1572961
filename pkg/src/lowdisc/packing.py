"""Greedy delta-packings of a set family under the symmetric-difference metric."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .setsystem import SetSystem


@dataclass(frozen=True)
class Packing:
    """A maximal delta-separated subfamily, with the admission trace.

    members: admitted row ids in admission order.
    link[c]: for every scanned row, the first admitted member found within
    delta of it (itself when admitted, -1 when ineligible under size_cap).
    """

    delta: int
    size_cap: int  # -1 means uncapped
    members: np.ndarray
    link: np.ndarray
    order_mode: str
    seed: int | None
    parent_hash: str

    @property
    def count(self) -> int:
        return len(self.members)

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "size_cap": self.size_cap,
            "members": [int(v) for v in self.members],
            "link": [int(v) for v in self.link],
            "order_mode": self.order_mode,
            "seed": self.seed,
            "parent_hash": self.parent_hash,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Packing":
        return cls(
            delta=int(doc["delta"]),
            size_cap=int(doc["size_cap"]),
            members=np.asarray(doc["members"], dtype=np.int64),
            link=np.asarray(doc["link"], dtype=np.int64),
            order_mode=str(doc["order_mode"]),
            seed=doc.get("seed"),
            parent_hash=str(doc["parent_hash"]),
        )


def save_packing(p: Packing, path: str) -> None:
    with open(path, "w") as f:
        json.dump(p.to_json_dict(), f, separators=(",", ":"), sort_keys=True)
        f.write("\n")


def load_packing(path: str) -> Packing:
    with open(path) as f:
        return Packing.from_json_dict(json.load(f))


def _scan_order(sys: SetSystem, order: str, seed: int) -> np.ndarray:
    if order == "input":
        return np.arange(sys.m, dtype=np.int64)
    if order == "by-size-descending":
        # stable: ties keep input order
        return np.argsort(-sys.sizes, kind="stable").astype(np.int64)
    if order == "seeded-shuffle":
        rng = np.random.Generator(np.random.PCG64(seed))
        return rng.permutation(sys.m).astype(np.int64)
    raise ValueError(f"unknown order {order!r}")


def greedy_packing(
    sys: SetSystem,
    delta: int,
    order: str = "input",
    seed: int = 0,
    size_cap: int = -1,
) -> Packing:
    """Maximal packing with pairwise symmetric difference strictly > delta.

    Scans rows in the requested order and admits a row iff no previously
    admitted row lies within delta of it. delta = 0 admits one copy per
    distinct set; any delta >= n admits only the first eligible row.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    scan = _scan_order(sys, order, seed)
    admitted, link = _kernels.greedy_pack(
        sys.words, sys.sizes.astype(np.int64), scan, np.int64(delta), np.int64(size_cap)
    )
    members = scan[admitted[scan]]
    return Packing(
        delta=delta,
        size_cap=size_cap,
        members=members.astype(np.int64),
        link=link,
        order_mode=order,
        seed=seed if order == "seeded-shuffle" else None,
        parent_hash=sys.content_hash(),
    )


def greedy_packing_capped(
    sys: SetSystem, delta: int, size_cap: int, order: str = "input", seed: int = 0
) -> Packing:
    """greedy_packing restricted to sets of size <= size_cap."""
    if size_cap < 0:
        raise ValueError("size_cap must be >= 0")
    return greedy_packing(sys, delta, order=order, seed=seed, size_cap=size_cap)


def verify_separated(sys: SetSystem, packing: Packing) -> tuple[bool, tuple[int, int] | None]:
    """Exhaustively check pairwise distances are strictly > delta."""
    i, j, _ = _kernels.verify_separated_kernel(
        sys.words, packing.members.astype(np.int64), np.int64(packing.delta)
    )
    if i < 0:
        return True, None
    return False, (int(i), int(j))


def verify_maximal(sys: SetSystem, packing: Packing) -> tuple[bool, int | None]:
    """Exhaustively check no eligible row could still be added."""
    member_mask = np.zeros(sys.m, dtype=bool)
    member_mask[packing.members] = True
    w = _kernels.verify_maximal_kernel(
        sys.words,
        sys.sizes.astype(np.int64),
        member_mask,
        packing.members.astype(np.int64),
        np.int64(packing.delta),
        np.int64(packing.size_cap),
    )
    if w < 0:
        return True, None
    return False, int(w)


@dataclass(frozen=True)
class PackingBoundReport:
    deltas: list[int]
    counts: list[int]
    exponent: float  # least-squares slope of log2 count vs log2 (n / delta)
    points: list[tuple[float, float]] = field(default_factory=list)


def packing_bound_report(
    sys: SetSystem, deltas: list[int] | None = None, order: str = "input", seed: int = 0
) -> PackingBoundReport:
    """Packing-size growth as delta shrinks.

    Fits log2 |P| against log2 (n / delta); for a family of primal shatter
    dimension d the slope should not exceed d by much.
    """
    n = sys.n
    if deltas is None:
        deltas = []
        dl = max(1, n // 2)
        while dl >= 1:
            deltas.append(dl)
            if dl == 1:
                break
            dl //= 2
    counts = [greedy_packing(sys, dl, order=order, seed=seed).count for dl in deltas]
    xs = np.log2([n / dl for dl in deltas])
    ys = np.log2(counts)
    if len(deltas) >= 2:
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = float("nan")
    return PackingBoundReport(
        deltas=list(deltas),
        counts=counts,
        exponent=slope,
        points=[(float(x), float(y)) for x, y in zip(xs, ys)],
    )
