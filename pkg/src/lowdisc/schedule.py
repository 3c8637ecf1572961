"""Per-layer discrepancy targets and the entropy budget that certifies them.

Each (class i, level j) layer gets a target delta that decays quadratically
away from a center level j0(i); the schedule is admissible when the summed
exponential budget over all layers stays below n/16, which is what the
constrained-walk coloring step needs. Constants can come from the worst-case
analysis ("theory") or from binary search against the actual layer counts
("calibrated").
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ScheduleParams:
    """Schedule shape for a padded ground set of size n (a power of two).

    d is the shatter exponent, d1 its size-sensitive refinement (1 <= d1 <= d
    < appears as exponents only). amp scales every delta; shift moves the
    center level down; count_const is the packing-count constant used by
    analytic budgets; tail_exp controls the additive 1/n^tail_exp slack the
    walk is allowed on top of each delta; cap_factor is the layer size cap
    multiplier.
    """

    n: int
    d: float = 2.0
    d1: float = 1.0
    amp: float = 1.0
    shift: float = 8.0
    count_const: float = 1.0
    tail_exp: float = 1.0
    cap_factor: int = 4
    mode: str = "calibrated"

    def __post_init__(self) -> None:
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two, at least 4")
        if not self.d > 1:
            raise ValueError("d must exceed 1")
        if not 1 <= self.d1 <= self.d:
            raise ValueError("need 1 <= d1 <= d")
        if self.mode not in ("calibrated", "theory"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def k(self) -> int:
        return self.n.bit_length() - 1


def compute_j0(n: int, d: float, d1: float, i: int, shift: float) -> float:
    """Center level for class i: above it deltas shrink, below they grow."""
    lg = math.log2(n)
    return lg / d + (1 - d1 / d) * (i - 1) - (1 + 1 / d) * math.log2(lg) - shift


def delta_value(p: ScheduleParams, i: int, j: int) -> float:
    """Target bound for a class-i row at level j."""
    j0 = compute_j0(p.n, p.d, p.d1, i, p.shift)
    lg = math.log2(p.n)
    peak = (
        p.amp
        * p.n ** (0.5 - 1 / (2 * p.d))
        / 2 ** ((0.5 - p.d1 / (2 * p.d)) * (i - 1))
        * lg ** (0.5 + 1 / (2 * p.d))
    )
    return peak / (1 + abs(j - j0)) ** 2


def delta_values(p: ScheduleParams, ij: np.ndarray) -> np.ndarray:
    """Vectorized delta_value over rows of (i, j) pairs."""
    i = ij[:, 0].astype(np.float64)
    j = ij[:, 1].astype(np.float64)
    lg = math.log2(p.n)
    j0 = lg / p.d + (1 - p.d1 / p.d) * (i - 1) - (1 + 1 / p.d) * math.log2(lg) - p.shift
    peak = (
        p.amp
        * p.n ** (0.5 - 1 / (2 * p.d))
        / 2 ** ((0.5 - p.d1 / (2 * p.d)) * (i - 1))
        * lg ** (0.5 + 1 / (2 * p.d))
    )
    return peak / (1 + np.abs(j - j0)) ** 2


def chain_bound(p: ScheduleParams, i: int, k: int | None = None) -> float:
    """Worst-case |chi(S)| for a class-i set: twice the summed chain deltas."""
    k = p.k if k is None else k
    return 2 * sum(delta_value(p, i, j) for j in range(i - 1, k + 1))


@dataclass(frozen=True)
class DeltaSchedule:
    params: ScheduleParams
    k: int
    centers: dict  # i -> j0
    table: dict  # (i, j) -> delta

    @classmethod
    def build(cls, p: ScheduleParams, k: int | None = None) -> "DeltaSchedule":
        k = p.k if k is None else k
        centers = {i: compute_j0(p.n, p.d, p.d1, i, p.shift) for i in range(1, k + 1)}
        table = {
            (i, j): delta_value(p, i, j) for i in range(1, k + 1) for j in range(i - 1, k + 1)
        }
        return cls(params=p, k=k, centers=centers, table=table)


def analytic_count(p: ScheduleParams, i: int, j: int) -> float:
    """Worst-case layer count: count_const * j^d * 2^(j d) / 2^((d-d1)(i-1))."""
    if j <= 0:
        return 1.0
    return p.count_const * j**p.d * 2.0 ** (j * p.d) / 2.0 ** ((p.d - p.d1) * (i - 1))


def anchor_size(p: ScheduleParams, i: int) -> float:
    """Size certificate for anchor rows of class i."""
    return min(p.cap_factor * p.n / 2 ** (i - 1), p.n / 2 ** (i - 2))


def level_size(p: ScheduleParams, i: int, j: int) -> float:
    """Size certificate for a class-i row at level j (anchor at j = i-1)."""
    if j == i - 1:
        return anchor_size(p, i)
    return p.n / 2 ** (j - 1)


@dataclass(frozen=True)
class BudgetReport:
    total: float
    threshold: float
    above_center: float  # mass from levels j >= j0
    below_center: float
    rows: list  # (i, j, j0, delta, count, s_j, term)

    @property
    def ok(self) -> bool:
        return self.total <= self.threshold


def entropy_budget(
    p: ScheduleParams, k: int | None = None, counts: dict | None = None
) -> BudgetReport:
    """Sum count(i,j) * exp(-delta^2 / (16 s_j)) over every layer.

    counts maps (i, j) to the actual layer size; None uses the analytic
    worst-case counts. The report splits the mass at each class's center
    level, which is where the worst terms concentrate.
    """
    k = p.k if k is None else k
    rows = []
    total = 0.0
    above = 0.0
    below = 0.0
    for i in range(1, k + 1):
        j0 = compute_j0(p.n, p.d, p.d1, i, p.shift)
        for j in range(i - 1, k + 1):
            cnt = counts.get((i, j), 0) if counts is not None else analytic_count(p, i, j)
            if cnt == 0:
                continue
            s = level_size(p, i, j)
            dl = delta_value(p, i, j)
            term = cnt * math.exp(-(dl * dl) / (16 * s))
            rows.append((i, j, j0, dl, cnt, s, term))
            total += term
            if j >= j0:
                above += term
            else:
                below += term
    return BudgetReport(
        total=total, threshold=p.n / 16, above_center=above, below_center=below, rows=rows
    )


def save_budget_csv(report: BudgetReport, path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "j0", "delta", "count", "s_j", "term"])
        for i, j, j0, dl, cnt, s, term in report.rows:
            w.writerow([i, j, f"{j0:.6g}", f"{dl:.6g}", f"{cnt:.6g}", f"{s:.6g}", f"{term:.6g}"])
        w.writerow([])
        w.writerow(["total", f"{report.total:.6g}", "threshold", f"{report.threshold:.6g}",
                    "above_center", f"{report.above_center:.6g}",
                    "below_center", f"{report.below_center:.6g}"])


# ---------------------------------------------------------------------------
# the walk-side admission condition


@dataclass(frozen=True)
class LmReport:
    total: float
    threshold: float

    @property
    def ok(self) -> bool:
        return self.total <= self.threshold


def lm_condition(deltas: np.ndarray, sizes: np.ndarray, n: int) -> LmReport:
    """Admission test for a constraint family over n points.

    Sum of exp(-delta^2 / (16 |M|)) over rows must stay below n/16; empty
    rows contribute nothing (any coloring satisfies them exactly).
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    pos = sizes > 0
    terms = np.exp(-(deltas[pos] ** 2) / (16.0 * sizes[pos]))
    return LmReport(total=float(terms.sum()), threshold=n / 16.0)


def row_budget_total(
    deltas: np.ndarray, sizes: np.ndarray, exclude_satisfied: bool = True
) -> float:
    """Budget mass of explicit rows; optionally drop rows any full coloring
    satisfies for free (delta >= |M|)."""
    deltas = np.asarray(deltas, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.float64)
    live = sizes > 0
    if exclude_satisfied:
        live &= deltas < sizes
    return float(np.exp(-(deltas[live] ** 2) / (16.0 * sizes[live])).sum())


# ---------------------------------------------------------------------------
# calibration


def _bisect_amp(total_at, threshold: float, rtol: float = 1e-3) -> float:
    lo, hi = 1e-6, 1.0
    for _ in range(200):
        if total_at(hi) <= threshold:
            break
        hi *= 2
    else:
        raise RuntimeError("budget does not close even at huge amplitude")
    if total_at(lo) <= threshold:
        return lo
    while hi / lo > 1 + rtol:
        mid = math.sqrt(lo * hi)
        if total_at(mid) <= threshold:
            hi = mid
        else:
            lo = mid
    return hi


def calibrate_amp(
    p: ScheduleParams,
    k: int | None = None,
    counts: dict | None = None,
    safety: float = 0.9,
    rtol: float = 1e-3,
) -> float:
    """Smallest amp whose budget clears safety * n/16, by bisection.

    The budget is monotone decreasing in amp, so bisection is exact up to
    rtol; safety < 1 leaves headroom for the count noise of real instances.
    """
    threshold = safety * p.n / 16.0

    def total_at(a: float) -> float:
        return entropy_budget(replace(p, amp=a), k=k, counts=counts).total

    return _bisect_amp(total_at, threshold, rtol)


def calibrate_amp_rows(
    p: ScheduleParams,
    row_ij: np.ndarray,
    row_sizes: np.ndarray,
    safety: float = 0.9,
    rtol: float = 1e-3,
    exclude_satisfied: bool = True,
) -> float:
    """Calibrate against explicit rows (actual sizes, actual multiplicity).

    With exclude_satisfied, rows whose delta outgrows their size drop out of
    the mass; the remaining mass still decreases in amp, so bisection holds.
    """
    threshold = safety * p.n / 16.0
    row_ij = np.asarray(row_ij)
    row_sizes = np.asarray(row_sizes, dtype=np.float64)

    def total_at(a: float) -> float:
        dl = delta_values(replace(p, amp=a), row_ij)
        return row_budget_total(dl, row_sizes, exclude_satisfied=exclude_satisfied)

    return _bisect_amp(total_at, threshold, rtol)


def theory_constants(count_const: float = 1.0, d: float = 2.0) -> tuple[float, float]:
    """Worst-case (amp, shift) making the budget close for every n.

    shift = ceil(6 + log2 count_const); amp just above 2^(6 + shift + 1 +
    log2 d). These are deliberately loose; calibrated mode finds the real
    constants per instance.
    """
    shift = float(math.ceil(6 + math.log2(count_const)))
    amp = 2.0 ** (6 + (shift + 1) + math.log2(d)) * (1 + 1 / 256)
    return amp, shift
