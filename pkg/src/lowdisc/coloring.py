"""Partial and full colorings through the constrained random walk.

lm_partial_coloring freezes at least half the points of one constraint
family; full_coloring iterates it over rounds, rebuilding the chain
hierarchy on the still-uncolored points each time, until everything is
colored. Small leftovers are finished by alternation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _bits, _kernels, _walk
from .chaining import Hierarchy, build_hierarchy, layer_families
from .schedule import (
    ScheduleParams,
    calibrate_amp_rows,
    chain_bound,
    delta_values,
    lm_condition,
    theory_constants,
)
from .setsystem import Coloring, SetSystem, project


class WalkContractError(RuntimeError):
    """A row sum escaped its target bound; indicates a real defect."""


@dataclass(frozen=True)
class ConstraintSystem:
    """Sparse rows over n coordinates, each with a target bound.

    meta rows are (class_i, level_j, kind); kind 0 = direct, 1 = anchor,
    2 = addition, 3 = removal. Rows are stored with sorted indices.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    deltas: np.ndarray
    meta: np.ndarray  # int64 [R, 3]

    @property
    def r(self) -> int:
        return len(self.deltas)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    @classmethod
    def from_rows(cls, n: int, rows: list, deltas, meta=None) -> "ConstraintSystem":
        r = len(rows)
        indptr = np.zeros(r + 1, dtype=np.int64)
        parts = []
        for t, row in enumerate(rows):
            a = np.asarray(row, dtype=np.int64)
            indptr[t + 1] = indptr[t] + len(a)
            parts.append(np.sort(a))
        indices = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        if meta is None:
            meta = np.zeros((r, 3), dtype=np.int64)
        return cls(
            n=n,
            indptr=indptr,
            indices=indices,
            deltas=np.asarray(deltas, dtype=np.float64),
            meta=np.asarray(meta, dtype=np.int64),
        )

    @classmethod
    def from_system(cls, sys: SetSystem, deltas) -> "ConstraintSystem":
        mat = _bits.unpack_bool(sys.words, sys.n)
        rr, cc = np.nonzero(mat)
        indptr = np.zeros(sys.m + 1, dtype=np.int64)
        np.add.at(indptr, rr + 1, 1)
        indptr = np.cumsum(indptr)
        meta = np.zeros((sys.m, 3), dtype=np.int64)
        return cls(
            n=sys.n,
            indptr=indptr.astype(np.int64),
            indices=cc.astype(np.int64),
            deltas=np.asarray(deltas, dtype=np.float64),
            meta=meta,
        )

    def row_sums(self, x: np.ndarray) -> np.ndarray:
        if self.r == 0:
            return np.zeros(0, dtype=np.float64)
        owner = np.repeat(np.arange(self.r), self.sizes)
        return np.bincount(owner, weights=x[self.indices], minlength=self.r)

    def violations(self, x: np.ndarray, slack: float = 0.0) -> np.ndarray:
        return np.abs(self.row_sums(x)) - (self.deltas + slack)


def entropy_split_deltas(sys: SetSystem, margin: float = 1.0) -> np.ndarray:
    """Equal-mass bounds: every nonempty row gets the same budget term.

    With m' nonempty rows the per-row mass is margin * n / (16 m'), so the
    admission condition holds with total margin * n/16.
    """
    sizes = sys.sizes.astype(np.float64)
    m_pos = int(np.count_nonzero(sizes))
    out = np.zeros(sys.m, dtype=np.float64)
    if m_pos == 0:
        return out
    lg = math.log(16.0 * m_pos / (margin * sys.n))
    if lg <= 0:
        return out
    pos = sizes > 0
    out[pos] = np.sqrt(16.0 * sizes[pos] * lg)
    return out


# ---------------------------------------------------------------------------
# the walk


@dataclass(frozen=True)
class WalkParams:
    """Knobs for one walk run; None picks size-based defaults.

    gamma defaults to 1 / (8 sqrt(log2(R + N + 4))): small enough that face
    overshoot is negligible, large enough to freeze half the cube in
    O(1/gamma^2 + N) steps. The walk lands on faces exactly, so the only
    slack the caller needs is float roundoff, bounded far below the
    1/N^tail_exp allowance checked at the end.
    """

    gamma: float | None = None
    max_steps: int | None = None
    target_fraction: float = 0.5
    tail_exp: float = 1.0
    chunk_steps: int | None = None
    sleep_gap_steps: float = 8.0
    retry_limit: int = 8

    def resolved_gamma(self, n_rows: int, n_coords: int) -> float:
        if self.gamma is not None:
            return self.gamma
        return 1.0 / (8.0 * math.sqrt(math.log2(n_rows + n_coords + 4)))

    def resolved_max_steps(self, gamma: float, n_coords: int) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return int(math.ceil(64.0 / (gamma * gamma))) + 64 * n_coords


@dataclass
class WalkState:
    """Resumable walk over one constraint system (vacuous rows removed)."""

    cs: ConstraintSystem
    params: WalkParams
    x: np.ndarray
    live: np.ndarray
    sums: np.ndarray
    live_len: np.ndarray
    row_state: np.ndarray
    heap_thr: np.ndarray
    heap_row: np.ndarray
    hstate: np.ndarray
    awake: np.ndarray
    astate: np.ndarray
    basis_rows: np.ndarray
    minv: np.ndarray
    dep_rows: np.ndarray
    dstate: np.ndarray
    icnt: np.ndarray
    fcnt: np.ndarray
    rng: np.random.Generator
    gamma: float
    max_steps: int
    target: int
    chunk: int
    gauss: np.ndarray
    status: int = _walk.NEED_CHUNK

    @property
    def steps(self) -> int:
        return int(self.icnt[_walk.I_STEP])

    @property
    def frozen_count(self) -> int:
        return int(self.icnt[_walk.I_FROZEN])

    def stats(self) -> dict:
        return {
            "steps": self.steps,
            "frozen": self.frozen_count,
            "basis": int(self.icnt[_walk.I_BSIZE]),
            "dependents": int(self.dstate[0]),
            "awake": int(self.astate[0]),
            "wakes": int(self.icnt[_walk.I_WAKES]),
            "done_rows": int(self.icnt[_walk.I_DONE]),
            "late_wakes": int(self.icnt[_walk.I_LATE]),
            "cum_len": float(self.fcnt[_walk.F_CUM]),
            "tracked_violation": float(self.fcnt[_walk.F_VIOL]),
            "status": int(self.status),
        }


def make_walk_state(
    cs: ConstraintSystem, seed: int | np.random.SeedSequence, params: WalkParams | None = None
) -> WalkState:
    params = params or WalkParams()
    n = cs.n
    r = cs.r
    if np.any(cs.deltas <= 0):
        raise ValueError("all row bounds must be positive (drop vacuous rows first)")
    gamma = params.resolved_gamma(r, n)
    max_steps = params.resolved_max_steps(gamma, n)
    target = int(math.ceil(params.target_fraction * n))
    sizes = cs.sizes.astype(np.int64)
    heap_thr = np.empty(r + 4, dtype=np.float64)
    heap_row = np.empty(r + 4, dtype=np.int64)
    hsize = 0
    row_state = np.full(r, _walk.ASLEEP, dtype=np.int8)
    # initial thresholds: sums start at zero, slack is the full delta
    with np.errstate(divide="ignore"):
        thr0 = cs.deltas / np.sqrt(np.maximum(sizes, 1))
    order = np.argsort(thr0, kind="stable")
    heap_thr[:r] = thr0[order]
    heap_row[:r] = order
    hsize = r  # already heap-ordered since sorted ascending
    max_b = min(r, n) + 2
    chunk = params.chunk_steps or max(256, (1 << 22) // max(n, 1))
    rng = np.random.Generator(np.random.PCG64(seed))
    return WalkState(
        cs=cs,
        params=params,
        x=np.zeros(n, dtype=np.float64),
        live=np.ones(n, dtype=bool),
        sums=np.zeros(r, dtype=np.float64),
        live_len=sizes.copy(),
        row_state=row_state,
        heap_thr=heap_thr,
        heap_row=heap_row,
        hstate=np.array([hsize], dtype=np.int64),
        awake=np.zeros(r + 1, dtype=np.int64),
        astate=np.zeros(1, dtype=np.int64),
        basis_rows=np.zeros(max_b, dtype=np.int64),
        minv=np.zeros((max_b, max_b), dtype=np.float64),
        dep_rows=np.zeros(r + 1, dtype=np.int64),
        dstate=np.zeros(1, dtype=np.int64),
        icnt=np.zeros(_walk.ICNT_LEN, dtype=np.int64),
        fcnt=np.zeros(_walk.FCNT_LEN, dtype=np.float64),
        rng=rng,
        gamma=gamma,
        max_steps=max_steps,
        target=target,
        chunk=chunk,
        gauss=np.zeros((0, n), dtype=np.float64),
    )


def _kernel_call(st: WalkState, step_budget: int) -> int:
    return int(
        _walk.walk_kernel(
            st.cs.indptr,
            st.cs.indices,
            st.cs.deltas,
            st.x,
            st.live,
            st.sums,
            st.live_len,
            st.row_state,
            st.heap_thr,
            st.heap_row,
            st.hstate,
            st.awake,
            st.astate,
            st.basis_rows,
            st.minv,
            st.dep_rows,
            st.dstate,
            st.icnt,
            st.fcnt,
            st.gauss,
            np.float64(st.gamma),
            np.float64(4.0 * st.cs.n),
            np.int64(st.target),
            np.int64(step_budget),
            np.float64(st.params.sleep_gap_steps * st.gamma * math.sqrt(st.cs.n)),
        )
    )


def walk_run(st: WalkState, step_budget: int | None = None) -> int:
    """Advance the walk until it finishes or exhausts step_budget steps."""
    budget = st.max_steps if step_budget is None else min(st.max_steps, st.steps + step_budget)
    while True:
        if st.icnt[_walk.I_CHUNKPOS] >= len(st.gauss):
            st.gauss = st.rng.standard_normal((st.chunk, st.cs.n))
            st.icnt[_walk.I_CHUNKPOS] = 0
        status = _kernel_call(st, budget)
        if status == _walk.NEED_CHUNK:
            continue
        if status == _walk.STEP_BUDGET and budget < st.max_steps:
            status = _walk.NEED_CHUNK  # slice exhausted, walk itself not done
        st.status = status
        return status


def walk_step(st: WalkState) -> int:
    """Single step, for inspection and tests."""
    return walk_run(st, step_budget=1)


# ---------------------------------------------------------------------------
# partial coloring


@dataclass(frozen=True)
class PartialColoringResult:
    coloring: Coloring
    x: np.ndarray
    colored: int
    target: int
    retries: int
    steps: int
    status: int
    max_violation: float
    stats: dict

    @property
    def ok(self) -> bool:
        return self.colored >= self.target


def _split_vacuous(cs: ConstraintSystem) -> tuple[ConstraintSystem, np.ndarray]:
    sizes = cs.sizes
    keep = (sizes > 0) & (cs.deltas < sizes)
    if keep.all():
        return cs, keep
    kept_rows = np.nonzero(keep)[0]
    rows = [cs.indices[cs.indptr[t] : cs.indptr[t + 1]] for t in kept_rows]
    return (
        ConstraintSystem.from_rows(cs.n, rows, cs.deltas[keep], cs.meta[keep]),
        keep,
    )


def lm_partial_coloring(
    cs: ConstraintSystem,
    seed: int | np.random.SeedSequence = 0,
    params: WalkParams | None = None,
) -> PartialColoringResult:
    """Freeze at least half the coordinates while every row sum, counting
    unfrozen coordinates at their final fractional value, stays within its
    bound plus 1/n^tail_exp.

    Rows no full coloring can violate (delta >= size) are excluded from the
    walk but still checked at the end. Failed attempts retry with fresh
    randomness up to retry_limit times.
    """
    params = params or WalkParams()
    active, _ = _split_vacuous(cs)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(max(1, params.retry_limit))
    slack = 1.0 / cs.n ** params.tail_exp
    best: WalkState | None = None
    retries = 0
    for attempt, child in enumerate(children):
        st = make_walk_state(active, child, params)
        status = walk_run(st)
        if st.frozen_count >= st.target:
            best = st
            retries = attempt
            break
        if best is None or st.frozen_count > best.frozen_count:
            best = st
        retries = attempt
    assert best is not None
    st = best
    frozen = ~st.live
    values = np.zeros(cs.n, dtype=np.int8)
    values[frozen] = np.sign(st.x[frozen]).astype(np.int8)
    viol = float(cs.violations(st.x).max(initial=-np.inf))
    if viol > slack:
        raise WalkContractError(
            f"row sum exceeded its bound by {viol:.3e} (> {slack:.3e} allowed)"
        )
    return PartialColoringResult(
        coloring=Coloring(values=values, seed=None, params_hash=None),
        x=st.x.copy(),
        colored=int(frozen.sum()),
        target=st.target,
        retries=retries,
        steps=st.steps,
        status=st.status,
        max_violation=viol,
        stats=st.stats(),
    )


# ---------------------------------------------------------------------------
# full coloring pipeline


@dataclass(frozen=True)
class PipelineParams:
    """Round-loop configuration for full colorings.

    mode "calibrated" bisects the schedule amplitude against the actual
    constraint rows of each round (safety < 1 leaves noise headroom); mode
    "theory" uses the closed-form worst-case constants. min_ground is the
    leftover size finished by plain alternation.
    """

    d: float = 2.0
    d1: float = 1.0
    mode: str = "calibrated"
    amp: float | None = None
    shift: float | None = None
    count_const: float = 1.0
    tail_exp: float = 1.0
    cap_factor: int = 4
    safety: float = 0.9
    min_ground: int = 8
    order: str = "input"
    link_mode: str = "blocker"
    walk: WalkParams = field(default_factory=WalkParams)
    max_rounds: int = 64

    def params_hash(self) -> str:
        doc = {k: (v if not isinstance(v, WalkParams) else vars(v)) for k, v in vars(self).items()}
        blob = json.dumps(doc, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _round_rows(h: Hierarchy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assemble constraint rows for one round from the chain layers.

    Returns (words [R, W], ij [R, 2], kind [R]) with empty rows dropped.
    Each class-i layer contributes its anchors at level i-1 and, per member
    f at level j >= i, the added and removed parts against f's link at the
    level below.
    """
    table = layer_families(h)
    words = h.sys.words
    blocks = []
    ijs = []
    kinds = []
    for (i, j), members in sorted(table.ids.items()):
        if not len(members):
            continue
        if j == i - 1:
            blocks.append(words[members])
            ijs.append(np.full((len(members), 2), (i, j), dtype=np.int64))
            kinds.append(np.full(len(members), 1, dtype=np.int64))
        else:
            prev = h.links[j - 1][members]
            add = words[members] & ~words[prev]
            rem = words[prev] & ~words[members]
            blocks.append(add)
            ijs.append(np.full((len(members), 2), (i, j), dtype=np.int64))
            kinds.append(np.full(len(members), 2, dtype=np.int64))
            blocks.append(rem)
            ijs.append(np.full((len(members), 2), (i, j), dtype=np.int64))
            kinds.append(np.full(len(members), 3, dtype=np.int64))
    w = np.vstack(blocks)
    ij = np.vstack(ijs)
    kind = np.concatenate(kinds)
    sizes = _bits.popcounts(w)
    keep = sizes > 0
    return w[keep], ij[keep], kind[keep]


def _dedup_rows_min_delta(
    w: np.ndarray, ij: np.ndarray, kind: np.ndarray, n: int, ref: ScheduleParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse identical supports, keeping the most demanding (smallest
    delta) label; the delta ordering does not depend on the amplitude."""
    key = _bits.rows_to_bytes(w, n)
    void = np.ascontiguousarray(key).view(
        np.dtype((np.void, key.dtype.itemsize * key.shape[1]))
    ).ravel()
    _, group = np.unique(void, return_inverse=True)
    dl = delta_values(ref, ij)
    order = np.lexsort((dl, group))
    sg = group[order]
    first = np.ones(len(sg), dtype=bool)
    first[1:] = sg[1:] != sg[:-1]
    keep = order[first]
    keep.sort()
    return w[keep], ij[keep], kind[keep]


@dataclass(frozen=True)
class RoundTrace:
    round: int
    ground: int
    m_sub: int
    rows_total: int
    rows_kept: int
    amp: float
    budget: float
    budget_threshold: float
    colored: int
    steps: int
    retries: int
    max_violation: float
    chain_ratio: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class FullColoringResult:
    coloring: Coloring
    rounds: list
    seed: int
    params: PipelineParams

    def trace_json(self) -> str:
        return "\n".join(json.dumps(r.as_dict(), sort_keys=True) for r in self.rounds)


def _chain_check(
    h: Hierarchy, sch: ScheduleParams, x: np.ndarray, slack: float
) -> float:
    """Max ratio of |hybrid chi(S)| to its chain bound; raises above 1."""
    m = h.m
    sums = np.empty(m, dtype=np.float64)
    for lo in range(0, m, 8192):
        hi = min(lo + 8192, m)
        sums[lo:hi] = _bits.unpack_bool(h.sys.words[lo:hi], h.sys.n) @ x
    worst = 0.0
    k = h.k
    bounds = {i: chain_bound(sch, i, k) + (2 * k + 3) * slack for i in range(1, k + 1)}
    for i in range(1, k + 1):
        rows = h.classes == i
        if not rows.any():
            continue
        r = float(np.abs(sums[rows]).max() / bounds[i])
        worst = max(worst, r)
    if worst > 1 + 1e-9:
        raise WalkContractError(f"chain bound exceeded, ratio {worst:.4f}")
    return worst


def full_coloring(
    sys: SetSystem, seed: int = 0, params: PipelineParams | None = None
) -> FullColoringResult:
    """Color every point by iterated partial colorings.

    Each round restricts the family to the uncolored points, rebuilds the
    hierarchy and its schedule, colors at least half of what is left, and
    repeats; the last min_ground points alternate signs. Per round the
    hybrid sums are checked against twice the summed chain deltas, which is
    the structural guarantee the schedule exists to provide.
    """
    params = params or PipelineParams()
    n = sys.n
    chi = np.zeros(n, dtype=np.int8)
    live_idx = np.arange(n)
    rounds: list[RoundTrace] = []
    root = np.random.SeedSequence(seed)
    round_seeds = root.spawn(params.max_rounds)
    for rnd in range(params.max_rounds):
        if len(live_idx) <= params.min_ground:
            break
        sub, _ = project(sys, live_idx)
        n_live = len(live_idx)
        if sub.m == 0 or int(sub.sizes.max(initial=0)) == 0:
            break
        rs = round_seeds[rnd]
        hier_seed = int(rs.generate_state(1)[0])
        h = build_hierarchy(sub, order=params.order, seed=hier_seed, link_mode=params.link_mode)
        w, ij, kind = _round_rows(h)
        rows_total = len(w)

        if params.mode == "theory":
            t_amp, t_shift = theory_constants(params.count_const, params.d)
            amp = params.amp if params.amp is not None else t_amp
            shift = params.shift if params.shift is not None else t_shift
        else:
            amp = params.amp
            shift = params.shift if params.shift is not None else 6.0
        ref = ScheduleParams(
            n=h.n_pad,
            d=params.d,
            d1=params.d1,
            amp=1.0,
            shift=shift,
            count_const=params.count_const,
            tail_exp=params.tail_exp,
            cap_factor=params.cap_factor,
            mode=params.mode,
        )
        w, ij, kind = _dedup_rows_min_delta(w, ij, kind, sub.n, ref)
        sizes = _bits.popcounts(w).astype(np.float64)
        if amp is None:
            amp = calibrate_amp_rows(
                ref, ij, sizes, safety=params.safety * n_live / h.n_pad
            )
        sch = replace(ref, amp=amp)
        deltas = delta_values(sch, ij)
        keep = deltas < sizes
        gate = lm_condition(deltas[keep], sizes[keep], n_live)
        if not gate.ok:
            raise WalkContractError(
                f"admission gate failed in round {rnd}: {gate.total:.2f} > {gate.threshold:.2f}"
            )

        kept_idx = np.nonzero(keep)[0]
        mat = _bits.unpack_bool(w[kept_idx], sub.n)
        rr, cc = np.nonzero(mat)
        counts = np.bincount(rr, minlength=len(kept_idx))
        offs = np.concatenate([[0], np.cumsum(counts)])
        rows = [cc[offs[t] : offs[t + 1]] for t in range(len(kept_idx))]
        meta = np.column_stack([ij[kept_idx], kind[kept_idx]])
        cs = ConstraintSystem.from_rows(sub.n, rows, deltas[kept_idx], meta)

        part = lm_partial_coloring(cs, seed=rs, params=params.walk)
        if not part.ok:
            raise WalkContractError(
                f"round {rnd} froze {part.colored} < {part.target} after retries"
            )
        slack = 1.0 / sub.n ** params.tail_exp
        ratio = _chain_check(h, sch, part.x, slack)

        vals = part.coloring.values
        colored = vals != 0
        chi[live_idx[colored]] = vals[colored]
        live_idx = live_idx[~colored]
        rounds.append(
            RoundTrace(
                round=rnd,
                ground=n_live,
                m_sub=sub.m,
                rows_total=rows_total,
                rows_kept=int(keep.sum()),
                amp=float(amp),
                budget=gate.total,
                budget_threshold=gate.threshold,
                colored=int(colored.sum()),
                steps=part.steps,
                retries=part.retries,
                max_violation=part.max_violation,
                chain_ratio=ratio,
            )
        )
    # alternate the leftovers, balanced by position
    for t, e in enumerate(np.sort(live_idx)):
        chi[e] = 1 if t % 2 == 0 else -1
    return FullColoringResult(
        coloring=Coloring(values=chi, seed=seed, params_hash=params.params_hash()),
        rounds=rounds,
        seed=seed,
        params=params,
    )


# ---------------------------------------------------------------------------
# baselines and reports


def random_coloring(n: int, seed: int = 0) -> Coloring:
    rng = np.random.Generator(np.random.PCG64(seed))
    vals = rng.integers(0, 2, size=n).astype(np.int8) * 2 - 1
    return Coloring(values=vals, seed=seed, params_hash=None)


def brute_force_min_disc(sys: SetSystem) -> tuple[int, Coloring]:
    """Exact minimum discrepancy over all 2^n full colorings (n <= 24)."""
    if sys.n > 24:
        raise ValueError("exhaustive search is limited to n <= 24")
    masks = np.zeros(sys.m, dtype=np.uint64)
    for t in range(sys.m):
        acc = np.uint64(0)
        for e in sys.set_indices(t):
            acc |= np.uint64(1) << np.uint64(e)
        masks[t] = acc
    best, pattern = _kernels.brute_force_min_disc_kernel(
        masks, sys.sizes.astype(np.int64), np.int64(sys.n)
    )
    vals = np.where(
        (np.uint64(pattern) >> np.arange(sys.n, dtype=np.uint64)) & np.uint64(1),
        1,
        -1,
    ).astype(np.int8)
    return int(best), Coloring(values=vals, seed=None, params_hash=None)


@dataclass(frozen=True)
class EnvelopeReport:
    """Observed |chi| against the size-sensitive envelope.

    envelope(S) = |S|^(1/2 - d1/(2d)) * n^((d1-1)/(2d)) * log2(n)^(3/2 + 1/(2d));
    ratios are |chi(S)| / envelope(S) over nonempty sets.
    """

    max_ratio: float
    per_class_max_chi: dict
    per_class_max_ratio: dict
    per_class_count: dict
    per_class_argmax: dict  # set id attaining the class max |chi|
    n_pad: int
    log_exponent: float


def evaluate_sensitive(
    sys: SetSystem, coloring: Coloring, d: float = 2.0, d1: float = 1.0
) -> EnvelopeReport:
    from .chaining import classify_sizes, next_pow2
    from .setsystem import chi_vector

    n_pad = max(2, next_pow2(sys.n))
    k = n_pad.bit_length() - 1
    chi = np.abs(chi_vector(sys, coloring)).astype(np.float64)
    sizes = sys.sizes.astype(np.float64)
    log_exp = 1.5 + 1.0 / (2 * d)
    env = (
        np.maximum(sizes, 1.0) ** (0.5 - d1 / (2 * d))
        * n_pad ** ((d1 - 1) / (2 * d))
        * math.log2(n_pad) ** log_exp
    )
    classes = classify_sizes(sys.sizes.astype(np.int64), n_pad, k)
    per_chi: dict[int, float] = {}
    per_ratio: dict[int, float] = {}
    per_count: dict[int, int] = {}
    per_arg: dict[int, int] = {}
    pos = sizes > 0
    for i in range(1, k + 1):
        rows = np.flatnonzero((classes == i) & pos)
        if not rows.size:
            continue
        top = rows[int(np.argmax(chi[rows]))]
        per_chi[i] = float(chi[top])
        per_ratio[i] = float((chi[rows] / env[rows]).max())
        per_count[i] = int(rows.size)
        per_arg[i] = int(top)
    overall = float((chi[pos] / env[pos]).max()) if pos.any() else 0.0
    return EnvelopeReport(
        max_ratio=overall,
        per_class_max_chi=per_chi,
        per_class_max_ratio=per_ratio,
        per_class_count=per_count,
        per_class_argmax=per_arg,
        n_pad=n_pad,
        log_exponent=log_exp,
    )
