"""Instance generators: geometric range families and abstract systems.

Geometric predicates use float evaluation with a forward error filter and
fall back to exact rational arithmetic on the (measure-zero) uncertain
cases, so sidedness is always exact for the given double coordinates.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _bits
from .setsystem import SetSystem

# exhaustive general-position verification is O(n^(dim+1)); above these sizes
# we rely on random doubles being nondegenerate and on detection during use
_VERIFY_CAP = {1: 1 << 20, 2: 256, 3: 64, 4: 32}

_ERR_COEF = {2: 4.0e-16, 3: 8.0e-16, 4: 1.6e-15}


class DegeneracyError(ValueError):
    """Raised when an affinely dependent point tuple is detected."""


@dataclass(frozen=True)
class PointSet:
    dim: int
    coords: np.ndarray  # float64 [n, dim]
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def to_json_dict(self) -> dict:
        return {"dim": self.dim, "points": self.coords.tolist(), "seed": self.seed}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PointSet":
        pts = np.asarray(doc["points"], dtype=np.float64)
        return cls(int(doc["dim"]), pts.reshape(len(doc["points"]), int(doc["dim"])), doc.get("seed"))


def save_points(pts: PointSet, path: str) -> None:
    with open(path, "w") as f:
        json.dump(pts.to_json_dict(), f, separators=(",", ":"), sort_keys=True)
        f.write("\n")


def load_points(path: str) -> PointSet:
    with open(path) as f:
        return PointSet.from_json_dict(json.load(f))


# ---------------------------------------------------------------------------
# orientation predicates


def _orient_exact(rows: np.ndarray) -> int:
    """Sign of det of a small float matrix, computed exactly over rationals."""
    mat = [[Fraction(float(v)) for v in row] for row in rows]
    d = len(mat)
    det = Fraction(0)
    if d == 1:
        det = mat[0][0]
    elif d == 2:
        det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    else:
        for perm_cols in itertools.permutations(range(d)):
            sign = 1
            seen = list(perm_cols)
            # parity via inversion count; d <= 4 so brute force is fine
            inv = sum(1 for a in range(d) for b in range(a + 1, d) if seen[a] > seen[b])
            sign = -1 if inv % 2 else 1
            term = Fraction(1)
            for r in range(d):
                term *= mat[r][perm_cols[r]]
            det += sign * term
    return (det > 0) - (det < 0)


def orientation(simplex: np.ndarray, x: np.ndarray) -> int:
    """Orientation of point x against the oriented simplex rows (dim points).

    Returns +1 / -1 / 0 for left / right / on. Exact for the given doubles.
    """
    simplex = np.asarray(simplex, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    d = simplex.shape[1]
    rows = simplex[1:] - simplex[0] if d > 1 else None
    if d == 1:
        diff = float(x[0] - simplex[0, 0])
        return (diff > 0) - (diff < 0)
    rel = np.vstack([rows, (x - simplex[0])[None, :]])
    det = float(np.linalg.det(rel))
    scale = float(np.abs(rel).sum())
    if abs(det) > _ERR_COEF[d] * max(scale, 1.0) ** d:
        return (det > 0) - (det < 0)
    return _orient_exact(rel)


def _orient2_batch(p: np.ndarray, q: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Signs of orient(p, q, x) for all points xs; exact fallback per point."""
    ux, uy = q[0] - p[0], q[1] - p[1]
    vx = xs[:, 0] - p[0]
    vy = xs[:, 1] - p[1]
    det = ux * vy - uy * vx
    mag = abs(ux) * np.abs(vy) + abs(uy) * np.abs(vx)
    out = np.sign(det).astype(np.int8)
    unsure = np.abs(det) <= 4.0e-16 * mag
    for idx in np.nonzero(unsure)[0]:
        out[idx] = _orient_exact(
            np.array([[ux, uy], [vx[idx], vy[idx]]], dtype=np.float64)
        )
    return out


# ---------------------------------------------------------------------------
# point generation


class GenerationError(RuntimeError):
    pass


def verify_general_position(pts: PointSet) -> tuple[bool, tuple[int, ...] | None]:
    """Exhaustive check that no dim+1 points are affinely dependent.

    Only feasible at small n (O(n^(dim+1)) tuples); callers above the cap in
    _VERIFY_CAP should rely on degeneracy detection during enumeration.
    """
    if pts.dim == 1:
        coords = pts.coords[:, 0]
        order = np.argsort(coords, kind="stable")
        dup = np.nonzero(np.diff(coords[order]) == 0)[0]
        if len(dup):
            a, b = int(order[dup[0]]), int(order[dup[0] + 1])
            return False, (a, b)
        return True, None
    for tup in itertools.combinations(range(pts.n), pts.dim + 1):
        simplex = pts.coords[list(tup[:-1])]
        if orientation(simplex, pts.coords[tup[-1]]) == 0:
            return False, tup
    return True, None


def gen_points(n: int, dim: int, dist: str = "uniform-cube", seed: int = 0) -> PointSet:
    """Random point set in general position.

    dist: uniform-cube | uniform-sphere | gaussian | convex-position.
    Degenerate tuples are resampled (one offending point replaced) up to a
    bounded retry count; verification is exhaustive only below the size cap.
    """
    if dim not in (1, 2, 3, 4):
        raise ValueError("dim must be in 1..4")
    if n < dim + 1 and dist == "convex-position" and dim > 1:
        raise ValueError("too few points for convex position")
    rng = np.random.Generator(np.random.PCG64(seed))

    def draw(count: int) -> np.ndarray:
        if dist == "uniform-cube":
            return rng.random((count, dim))
        if dist == "gaussian":
            return rng.standard_normal((count, dim))
        if dist == "uniform-sphere":
            g = rng.standard_normal((count, dim))
            return g / np.linalg.norm(g, axis=1, keepdims=True)
        if dist == "convex-position":
            if dim == 1:
                return rng.random((count, 1))
            if dim == 2:
                ang = np.sort(rng.random(count)) * 2 * np.pi
                return np.column_stack([np.cos(ang), np.sin(ang)])
            g = rng.standard_normal((count, dim))
            return g / np.linalg.norm(g, axis=1, keepdims=True)
        raise ValueError(f"unknown dist {dist!r}")

    coords = draw(n)
    pts = PointSet(dim, coords, seed)
    if n > _VERIFY_CAP.get(dim, 0):
        return pts
    for _ in range(32):
        ok, tup = verify_general_position(pts)
        if ok:
            return pts
        coords = coords.copy()
        coords[tup[-1]] = draw(1)[0]
        pts = PointSet(dim, coords, seed)
    raise GenerationError("could not reach general position within retry budget")


# ---------------------------------------------------------------------------
# range families


def interval_ranges(pts: PointSet, max_sets: int = 1_600_000) -> SetSystem:
    """All intervals of consecutive points on the line, plus the empty set.

    Point ids are the input ids; intervals run over the sorted coordinate
    order. m(m+1)/2 + 1 sets for m points. Order: empty set first, then
    intervals by (start, end) in sorted-position space.
    """
    if pts.dim != 1:
        raise ValueError("interval ranges need 1-dimensional points")
    coords = pts.coords[:, 0]
    n = pts.n
    total = n * (n + 1) // 2 + 1
    if total > max_sets:
        raise ValueError(
            f"interval family has {total} sets, above the materialization cap; "
            "use interval_ranges_thinned for large n"
        )
    order = np.argsort(coords, kind="stable")
    if np.any(np.diff(coords[order]) == 0):
        raise DegeneracyError("duplicate coordinates in 1-d point set")
    words = _bits.zeros(total, n)
    r = 1
    cur = np.zeros(n, dtype=bool)
    for a in range(n):
        cur[:] = False
        block = np.zeros((n - a, n), dtype=bool)
        for b in range(a, n):
            cur[order[b]] = True
            block[b - a] = cur
        words[r : r + n - a] = _bits.pack_bool(block)
        r += n - a
    return SetSystem(n, words)


def interval_ranges_thinned(pts: PointSet, max_sets: int, seed: int = 0) -> SetSystem:
    """Seeded sub-family of the interval family for large n.

    Always contains the empty set, every prefix interval in sorted order, the
    full set, and a sample of general intervals up to max_sets total. Every
    interval is a difference of two prefixes, so controlling prefixes
    controls the whole family.
    """
    if pts.dim != 1:
        raise ValueError("interval ranges need 1-dimensional points")
    n = pts.n
    coords = pts.coords[:, 0]
    order = np.argsort(coords, kind="stable")
    if np.any(np.diff(coords[order]) == 0):
        raise DegeneracyError("duplicate coordinates in 1-d point set")
    if max_sets < n + 2:
        raise ValueError("max_sets too small to hold the prefix family")
    pairs = {(0, b) for b in range(n)}  # prefixes [0..b] in sorted space
    budget = max_sets - 1 - len(pairs)
    rng = np.random.Generator(np.random.PCG64(seed))
    total_pairs = n * (n + 1) // 2
    if budget > 0:
        want = min(budget, total_pairs - len(pairs))
        draw = rng.choice(total_pairs, size=min(total_pairs, int(want * 1.3) + 16), replace=False)
        for code in np.sort(draw):
            # decode lexicographic (a, b) with a <= b
            a = int((2 * n + 1 - np.sqrt((2 * n + 1) ** 2 - 8 * code)) // 2)
            off = code - a * (2 * n - a + 1) // 2
            b = int(a + off)
            if a > b or b >= n:  # numeric edge of the decode
                continue
            if (a, b) not in pairs:
                pairs.add((a, b))
                if len(pairs) >= max_sets - 1:
                    break
    plist = sorted(pairs)
    mat = np.zeros((len(plist) + 1, n), dtype=bool)
    for r, (a, b) in enumerate(plist, start=1):
        mat[r, order[a : b + 1]] = True
    return SetSystem.from_bool(mat)


def halfspace_ranges(
    pts: PointSet,
    max_ranges: int | None = None,
    seed: int = 0,
    assert_count: bool = True,
) -> SetSystem:
    """All distinct subsets cut off by halfspaces (or a seeded sample).

    2D uses the canonical boundary form: for each ordered pair (p, q) the
    range is the open left side of the directed line p->q plus p itself,
    which enumerates every realizable subset exactly once in general
    position (n(n-1) of them, plus the empty and full sets). 3D/4D enumerate
    boundary tuples with all inclusion patterns and dedup. Output sets are
    sorted by bit-vector key, empty set first.

    max_ranges switches to sampling that many boundary pairs/tuples, for
    instance families too large to enumerate.
    """
    if pts.dim == 1:
        return _halflines(pts)
    if pts.dim == 2:
        return _halfplanes_2d(pts, max_ranges, seed, assert_count)
    return _halfspaces_highdim(pts, max_ranges, seed)


def _sorted_system(n: int, rows: list[np.ndarray]) -> SetSystem:
    words = np.vstack(rows) if rows else _bits.zeros(0, n)
    sys0 = SetSystem(n, words)
    keep, _ = _bits.dedup(sys0.words)
    kept = sys0.words[keep]
    key = _bits.rows_to_bytes(kept, n)
    order = np.lexsort(key.T[::-1])  # lexicographic by bytes, low byte last key
    return SetSystem(n, kept[order])


def _halflines(pts: PointSet) -> SetSystem:
    coords = pts.coords[:, 0]
    n = pts.n
    order = np.argsort(coords, kind="stable")
    if np.any(np.diff(coords[order]) == 0):
        raise DegeneracyError("duplicate coordinates")
    mat = np.zeros((2 * n + 2, n), dtype=bool)
    r = 1
    for t in range(n):  # prefixes and suffixes in sorted order
        mat[r, order[: t + 1]] = True
        mat[r + 1, order[t:]] = True
        r += 2
    mat[-1, :] = True
    return _sorted_system(n, [_bits.pack_bool(mat)])


def _iter_pairs_2d(n: int, max_ranges: int | None, seed: int):
    if max_ranges is None:
        for i in range(n):
            for j in range(n):
                if i != j:
                    yield i, j
        return
    total = n * (n - 1)
    want = min(max_ranges, total)
    rng = np.random.Generator(np.random.PCG64(seed))
    if total <= 4 * want:
        codes = rng.permutation(total)[:want]
    else:
        codes = np.unique(rng.integers(0, total, size=int(want * 1.5) + 16))
        rng.shuffle(codes)
        codes = codes[:want]
    for code in np.sort(codes):
        i = int(code // (n - 1))
        r = int(code % (n - 1))
        j = r + (1 if r >= i else 0)
        yield i, j


def _halfplanes_2d(pts: PointSet, max_ranges, seed, assert_count) -> SetSystem:
    n = pts.n
    xs = pts.coords
    rows = [np.zeros((1, _bits.n_words(n)), dtype=np.uint64)]  # empty set
    full = np.ones((1, n), dtype=bool)
    rows.append(_bits.pack_bool(full))
    block: list[np.ndarray] = []
    for i, j in _iter_pairs_2d(n, max_ranges, seed):
        s = _orient2_batch(xs[i], xs[j], xs)
        on = np.nonzero(s == 0)[0]
        for t in on:
            if t != i and t != j:
                raise DegeneracyError(f"collinear points ({i}, {j}, {int(t)})")
        mem = s > 0
        mem[i] = True
        mem[j] = False
        block.append(mem)
        if len(block) >= 4096:
            rows.append(_bits.pack_bool(np.array(block)))
            block = []
    if block:
        rows.append(_bits.pack_bool(np.array(block)))
    out = _sorted_system(n, rows)
    if max_ranges is None and assert_count and n <= 64:
        expect = n * (n - 1) + 2
        if out.m != expect:
            raise AssertionError(f"halfplane range count {out.m} != {expect}")
    return out


def _halfspaces_highdim(pts: PointSet, max_ranges, seed) -> SetSystem:
    n, d = pts.n, pts.dim
    tuples = itertools.combinations(range(n), d)
    if max_ranges is not None:
        all_tuples = list(itertools.combinations(range(n), d))
        rng = np.random.Generator(np.random.PCG64(seed))
        take = min(len(all_tuples), max(1, max_ranges // (1 << (d + 1))))
        idx = np.sort(rng.permutation(len(all_tuples))[:take])
        tuples = (all_tuples[int(t)] for t in idx)
    rows = [np.zeros((1, _bits.n_words(n)), dtype=np.uint64), _bits.pack_bool(np.ones((1, n), dtype=bool))]
    block: list[np.ndarray] = []
    for tup in tuples:
        simplex = pts.coords[list(tup)]
        signs = np.empty(n, dtype=np.int8)
        for t in range(n):
            signs[t] = orientation(simplex, pts.coords[t])
        zero = [t for t in np.nonzero(signs == 0)[0] if t not in tup]
        if zero:
            raise DegeneracyError(f"affinely dependent tuple {tup + (int(zero[0]),)}")
        base_pos = signs > 0
        base_neg = signs < 0
        for base in (base_pos, base_neg):
            for pat in range(1 << d):
                mem = base.copy()
                for b in range(d):
                    mem[tup[b]] = bool(pat >> b & 1)
                block.append(mem)
        if len(block) >= 4096:
            rows.append(_bits.pack_bool(np.array(block)))
            block = []
    if block:
        rows.append(_bits.pack_bool(np.array(block)))
    return _sorted_system(n, rows)


def kset_count(sys: SetSystem, k: int) -> int:
    """Number of distinct member sets with at most k elements."""
    dd, _ = _bits.dedup(sys.words)
    return int(np.count_nonzero(sys.sizes[dd] <= k))


def random_abstract_system(
    n: int, m: int, density: float | None = None, size: int | None = None, seed: int = 0
) -> SetSystem:
    """Random family: Bernoulli(density) membership or fixed-size sets."""
    if (density is None) == (size is None):
        raise ValueError("give exactly one of density or size")
    rng = np.random.Generator(np.random.PCG64(seed))
    if density is not None:
        if not 0 <= density <= 1:
            raise ValueError("density must be in [0, 1]")
        mat = rng.random((m, n)) < density
    else:
        if not 0 <= size <= n:
            raise ValueError("size out of range")
        mat = np.zeros((m, n), dtype=bool)
        for r in range(m):
            mat[r, rng.choice(n, size=size, replace=False)] = True
    return SetSystem.from_bool(mat)


# ---------------------------------------------------------------------------
# brute-force realizability oracle (small n)


def linearly_separable(pts: PointSet, subset: np.ndarray) -> bool:
    """LP feasibility: some halfspace contains exactly `subset`.

    Hard-margin separation (<a,x> + b >= 1 inside, <= -1 outside) is always
    scalable for finite point sets with disjoint hulls, so this is exact for
    general-position inputs.
    """
    from scipy.optimize import linprog

    inside = np.asarray(subset, dtype=bool)
    if inside.all() or not inside.any():
        return True
    d = pts.dim
    a_in = pts.coords[inside]
    a_out = pts.coords[~inside]
    # variables: a (d), b; constraints rewritten as A_ub x <= b_ub
    a_ub = np.vstack(
        [np.hstack([-a_in, -np.ones((len(a_in), 1))]), np.hstack([a_out, np.ones((len(a_out), 1))])]
    )
    b_ub = -np.ones(len(a_in) + len(a_out))
    res = linprog(
        c=np.zeros(d + 1),
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * (d + 1),
        method="highs",
    )
    return bool(res.success)


def realizable_subsets_oracle(pts: PointSet) -> SetSystem:
    """All halfspace-realizable subsets by brute force (n <= 12)."""
    n = pts.n
    if n > 12:
        raise ValueError("oracle is exponential; n must be <= 12")
    rows = []
    for mask in range(1 << n):
        sub = np.array([(mask >> t) & 1 for t in range(n)], dtype=bool)
        if linearly_separable(pts, sub):
            rows.append(sub)
    return _sorted_system(n, [_bits.pack_bool(np.array(rows))])
