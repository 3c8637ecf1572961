"""Chain hierarchies: nested packings, size classes, canonical decompositions.

A hierarchy over a family of distinct sets is a tower F_0 .. F_k where
F_0 = {empty}, F_k = the whole family, and level j is a maximal packing at
separation n_pad / 2^j built by scanning the previous level's members first
(so the tower is nested). Every set then owns a chain of representatives
walking down the tower, each link moving by at most n_pad / 2^(j-1)
elements, and a canonical decomposition that replays the chain as an exact
sequence of disjoint additions and subset removals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _bits, _kernels
from .setsystem import SetSystem


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p <<= 1
    return p


def classify_size(size: int, n_pad: int, k: int) -> int:
    """Size class i: n_pad / 2^i <= |S| < n_pad / 2^(i-1); empty sets get k.

    The largest class (full-size sets) is merged into class 1, so i ranges
    over 1..k.
    """
    if size == 0:
        return k
    i = k - (int(size).bit_length() - 1)
    return min(max(i, 1), k)


def classify_sizes(sizes: np.ndarray, n_pad: int, k: int) -> np.ndarray:
    out = np.full(len(sizes), k, dtype=np.int64)
    pos = sizes > 0
    # floor(log2 s) via frexp exponent, exact for integer doubles
    expo = np.frexp(sizes[pos].astype(np.float64))[1] - 1
    out[pos] = np.clip(k - expo, 1, k)
    return out


@dataclass(frozen=True)
class Hierarchy:
    sys: SetSystem  # deduped working family; may end with an injected empty row
    n_pad: int
    k: int
    empty_id: int
    empty_injected: bool
    source_rows: np.ndarray  # working row -> input row id (-1 for injected empty)
    inverse: np.ndarray  # input row -> working row id
    level_members: list  # j -> admitted working ids, j = 0..k
    links: np.ndarray  # [k+1, m] row -> its F_j representative
    chains: np.ndarray  # [m, k+1] chains[s, j] = representative of s at level j
    classes: np.ndarray  # [m] size class of each working row
    link_mode: str
    order_mode: str
    seed: int

    @property
    def m(self) -> int:
        return self.sys.m

    def delta_at(self, j: int) -> int:
        return self.n_pad >> j

    def summary(self) -> dict:
        hist = np.bincount(self.classes, minlength=self.k + 1)
        return {
            "n": self.sys.n,
            "n_pad": self.n_pad,
            "k": self.k,
            "m": self.m,
            "empty_injected": self.empty_injected,
            "level_sizes": [int(len(mm)) for mm in self.level_members],
            "class_histogram": {int(i): int(c) for i, c in enumerate(hist) if c},
            "link_mode": self.link_mode,
            "order_mode": self.order_mode,
        }


def build_hierarchy(
    sys: SetSystem,
    order: str = "input",
    seed: int = 0,
    link_mode: str = "blocker",
) -> Hierarchy:
    """Build the nested packing tower and all chains for a family.

    Input rows are deduplicated (first occurrence kept); an empty row is
    appended when the family has none, so level 0 always exists. link_mode
    "blocker" uses the first admitted member that blocked each row during
    the greedy scan (distance <= delta_j by construction); "exact" recomputes
    every representative as a true nearest member, which is quadratic and
    meant for small instances.
    """
    if link_mode not in ("blocker", "exact"):
        raise ValueError(f"unknown link_mode {link_mode!r}")
    n = sys.n
    keep, dd_inv = _bits.dedup(sys.words)
    words = sys.words[keep]
    source = keep.astype(np.int64)
    sizes = _bits.popcounts(words)
    empty_rows = np.nonzero(sizes == 0)[0]
    if len(empty_rows):
        empty_id = int(empty_rows[0])
        injected = False
    else:
        words = np.vstack([words, np.zeros((1, words.shape[1]), dtype=np.uint64)])
        source = np.append(source, -1)
        sizes = np.append(sizes, 0)
        empty_id = len(words) - 1
        injected = True
    work = SetSystem(n, words)
    m = work.m
    n_pad = max(2, next_pow2(n))
    k = n_pad.bit_length() - 1

    if order == "input":
        base = np.arange(m, dtype=np.int64)
    elif order == "seeded-shuffle":
        rng = np.random.Generator(np.random.PCG64(seed))
        base = rng.permutation(m).astype(np.int64)
    else:
        raise ValueError(f"unknown order {order!r}")

    sizes64 = sizes.astype(np.int64)
    links = np.empty((k + 1, m), dtype=np.int64)
    level_members: list[np.ndarray] = [np.array([empty_id], dtype=np.int64)]
    links[0] = empty_id  # level 0 by fiat: everything represented by the empty set
    prev = level_members[0]
    for j in range(1, k):
        in_prev = np.zeros(m, dtype=bool)
        in_prev[prev] = True
        scan = np.concatenate([prev, base[~in_prev[base]]])
        admitted, link = _kernels.greedy_pack(
            work.words, sizes64, scan, np.int64(n_pad >> j), np.int64(-1)
        )
        if not admitted[prev].all():
            raise AssertionError("tower nesting violated at level %d" % j)
        members = scan[admitted[scan]]
        level_members.append(members.astype(np.int64))
        links[j] = link
        prev = level_members[-1]
    if k >= 1:
        level_members.append(np.arange(m, dtype=np.int64))
        links[k] = np.arange(m, dtype=np.int64)

    if link_mode == "exact":
        allrows = np.arange(m, dtype=np.int64)
        for j in range(1, k):
            mem = level_members[j]
            srt = np.argsort(sizes64[mem], kind="stable").astype(np.int64)
            nn_id, _ = _kernels.exact_nn(work.words, allrows, mem, srt)
            links[j] = nn_id

    chains = np.empty((m, k + 1), dtype=np.int64)
    chains[:, k] = np.arange(m)
    for j in range(k - 1, -1, -1):
        chains[:, j] = links[j][chains[:, j + 1]]

    classes = classify_sizes(sizes64, n_pad, k)
    return Hierarchy(
        sys=work,
        n_pad=n_pad,
        k=k,
        empty_id=empty_id,
        empty_injected=injected,
        source_rows=source,
        inverse=dd_inv.astype(np.int64),
        level_members=level_members,
        links=links,
        chains=chains,
        classes=classes,
        link_mode=link_mode,
        order_mode=order,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# layers


@dataclass(frozen=True)
class LayerTable:
    """Per size class, the distinct chain representatives at every level.

    ids[(i, j)] holds the working row ids of the class-i layer at level j,
    defined for j = i-1 (the chain anchors) through k. duplication is the
    total layer membership divided by the total tower membership; it
    measures how much the per-class split replicates tower members.
    """

    ids: dict
    k: int
    duplication: float

    def count(self, i: int, j: int) -> int:
        return len(self.ids.get((i, j), ()))


def layer_families(h: Hierarchy) -> LayerTable:
    ids: dict[tuple[int, int], np.ndarray] = {}
    total = 0
    for i in range(1, h.k + 1):
        rows = np.nonzero(h.classes == i)[0]
        if not len(rows):
            continue
        for j in range(i - 1, h.k + 1):
            layer = np.unique(h.chains[rows, j])
            ids[(i, j)] = layer
            total += len(layer)
    tower = sum(len(mm) for mm in h.level_members)
    return LayerTable(ids=ids, k=h.k, duplication=total / max(1, tower))


def capped_layer_families(h: Hierarchy, cap_factor: int = 4) -> dict:
    """Independent per-class packings under the size cap cap_factor * n/2^(i-1).

    The shared tower already satisfies the cap (see layer_size_bounds), so
    these exist for comparison: each (i, j) is a fresh maximal packing of the
    eligible rows at separation n_pad / 2^j built by scanning the shared
    level members first.
    """
    from .packing import greedy_packing_capped

    out: dict[tuple[int, int], np.ndarray] = {}
    for i in range(1, h.k + 1):
        if not np.any(h.classes == i):
            continue
        cap = min(h.sys.n, cap_factor * (h.n_pad >> (i - 1)))
        for j in range(max(0, i - 1), h.k + 1):
            p = greedy_packing_capped(h.sys, delta=h.n_pad >> j, size_cap=cap)
            out[(i, j)] = p.members
    return out


def layer_size_bounds(h: Hierarchy, table: LayerTable, cap_factor: int = 4) -> dict:
    """Check |member| <= cap_factor * n_pad / 2^(i-1) for every layer member.

    Chain geometry forces this: a class-i set has size < n_pad / 2^(i-1) and
    its level-j representative sits within n_pad / 2^(j-1) of it, which for
    j >= i - 1 keeps the representative below the cap. Returns per-class
    worst ratios and the violation count.
    """
    sizes = h.sys.sizes
    worst: dict[int, float] = {}
    violations = 0
    for (i, j), mem in table.ids.items():
        if not len(mem):
            continue
        cap = cap_factor * (h.n_pad >> (i - 1))
        top = int(sizes[mem].max())
        worst[i] = max(worst.get(i, 0.0), top / cap)
        if top > cap:
            violations += int(np.count_nonzero(sizes[mem] > cap))
    return {"worst_ratio_per_class": worst, "violations": violations}


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class CanonicalDecomposition:
    """S rebuilt from its class anchor by exact add/remove steps.

    Starting from the anchor representative at level class-1, each step j
    adds A_j (disjoint from the running set) and removes B_j (a subset of
    the running set after the addition), landing exactly on S at level k.
    """

    row: int
    class_i: int
    anchor: int
    steps: list  # (j, a_elements, b_elements)


def decompose(h: Hierarchy, row: int) -> CanonicalDecomposition:
    i = max(1, int(h.classes[row]))
    steps = []
    n = h.sys.n
    for j in range(i, h.k + 1):
        f = int(h.chains[row, j])
        fp = int(h.chains[row, j - 1])
        fa = set(_bits.row_indices(h.sys.words, f, n).tolist())
        fb = set(_bits.row_indices(h.sys.words, fp, n).tolist())
        steps.append((j, sorted(fa - fb), sorted(fb - fa)))
    return CanonicalDecomposition(
        row=row, class_i=i, anchor=int(h.chains[row, i - 1]), steps=steps
    )


def reconstruct(h: Hierarchy, dec: CanonicalDecomposition) -> list:
    cur = set(_bits.row_indices(h.sys.words, dec.anchor, h.sys.n).tolist())
    for j, a, b in dec.steps:
        if cur & set(a):
            raise AssertionError(f"addition not disjoint at level {j}")
        cur |= set(a)
        if not set(b) <= cur:
            raise AssertionError(f"removal not a subset at level {j}")
        cur -= set(b)
    return sorted(cur)


def verify_reconstruction(h: Hierarchy) -> dict:
    """Replay every chain and compare bit-exactly against its set."""
    bad, first_bad, disj, subs = _kernels.reconstruct_all(
        h.sys.words, h.chains, h.classes, np.int64(h.k)
    )
    return {
        "bad": int(bad),
        "first_bad": int(first_bad),
        "disjoint_violations": int(disj),
        "subset_violations": int(subs),
    }


def link_distance_profile(h: Hierarchy) -> dict:
    """Max |chain_j ^ chain_(j-1)| per level against the n_pad/2^(j-1) bound."""
    dists = _kernels.chain_link_distances(h.sys.words, h.chains, h.classes, np.int64(h.k))
    bounds = [2 * h.n_pad if j == 0 else h.n_pad >> (j - 1) for j in range(h.k + 1)]
    return {
        "max_link_distance": [int(v) for v in dists],
        "bound": bounds,
        "ok": all(int(dists[j]) <= bounds[j] for j in range(h.k + 1)),
    }


def chain_proximity_profile(h: Hierarchy) -> dict:
    """Max |S ^ chain_j(S)| per level; telescoping keeps it under n_pad/2^(j-1)."""
    m = h.m
    out = []
    rows = np.arange(m, dtype=np.int64)
    for j in range(h.k + 1):
        d = _kernels.sym_diff_to_member(h.sys.words, rows, h.chains[:, j].astype(np.int64))
        out.append(int(d.max()) if m else 0)
    bounds = [2 * h.n_pad if j == 0 else h.n_pad >> (j - 1) for j in range(h.k + 1)]
    ok = all(out[j] < bounds[j] or out[j] == 0 for j in range(h.k + 1))
    return {"max_set_distance": out, "bound": bounds, "ok": ok}


def save_debug(h: Hierarchy, path: str) -> None:
    doc = h.summary()
    doc["link_profile"] = link_distance_profile(h)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
