"""Experiment drivers: instance builders, scaling-law fits, baseline tables.

Artifacts are deterministic for a fixed config: per-instance seeds derive
from the config hash, rows are emitted in sorted key order, and floats are
formatted with fixed precision. Wall-clock measurements go to a sidecar
log, never into hashed artifacts.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .coloring import PipelineParams, evaluate_sensitive, full_coloring, random_coloring
from .generators import (
    gen_points,
    halfspace_ranges,
    interval_ranges,
    interval_ranges_thinned,
    random_abstract_system,
)
from .setsystem import SetSystem, discrepancy

KINDS = ("intervals", "halfplanes", "halfspaces3d", "abstract")

RESULTS_COLUMNS = ("kind", "n", "seed", "set_id", "set_size", "class_i", "chi", "envelope", "ratio")
BASELINES_COLUMNS = ("kind", "n", "seed", "method", "max_disc", "max_ratio")


def thread_count() -> int:
    """Worker cap from LOWDISC_THREADS; defaults to 1."""
    try:
        return max(1, int(os.environ.get("LOWDISC_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    ns: tuple
    seeds: tuple
    mode: str = "calibrated"
    d: float = 2.0
    d1: float = 1.0
    family_cap: int = 150_000
    out_dir: str = "."

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not self.ns or any(int(n) < 8 for n in self.ns):
            raise ValueError("each n must be >= 8")
        if not self.seeds:
            raise ValueError("at least one seed")
        if self.mode not in ("calibrated", "theory"):
            raise ValueError("mode must be calibrated or theory")
        if self.family_cap < 64:
            raise ValueError("family_cap too small")

    def science_dict(self) -> dict:
        # out_dir must not influence instance derivation
        return {
            "kind": self.kind,
            "ns": [int(n) for n in self.ns],
            "seeds": [int(s) for s in self.seeds],
            "mode": self.mode,
            "d": self.d,
            "d1": self.d1,
            "family_cap": self.family_cap,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.science_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def instance_seeds(config: ExperimentConfig, n: int, seed: int) -> tuple[int, int]:
    """(generation seed, coloring seed), keyed by the config hash."""
    ss = np.random.SeedSequence([int(config.config_hash(), 16) & (2**63 - 1), int(n), int(seed)])
    a, b = ss.spawn(2)
    return int(a.generate_state(1)[0]), int(b.generate_state(1)[0])


def build_instance(kind: str, n: int, gen_seed: int, family_cap: int) -> SetSystem:
    if kind == "intervals":
        pts = gen_points(n, 1, "uniform-cube", seed=gen_seed)
        if n * (n + 1) // 2 + 1 <= family_cap:
            return interval_ranges(pts)
        return interval_ranges_thinned(pts, max_sets=family_cap, seed=gen_seed)
    if kind == "halfplanes":
        pts = gen_points(n, 2, "uniform-cube", seed=gen_seed)
        cap = None if n * (n - 1) + 2 <= family_cap else family_cap
        return halfspace_ranges(pts, max_ranges=cap, seed=gen_seed)
    if kind == "halfspaces3d":
        pts = gen_points(n, 3, "uniform-cube", seed=gen_seed)
        return halfspace_ranges(pts, max_ranges=family_cap, seed=gen_seed)
    if kind == "abstract":
        return random_abstract_system(n, m=4 * n, density=0.3, seed=gen_seed)
    raise ValueError(f"unknown kind {kind!r}")


# -- scaling-law fit ------------------------------------------------------------


@dataclass(frozen=True)
class ClassPoint:
    """One (instance, size class) point for the log-log fit."""

    n: int
    seed: int
    class_i: int
    count: int
    size_mid: float
    max_chi: float
    n_pad: int


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    points: int
    expected: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "points": self.points,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def fit_size_exponent(
    points: list,
    expected: float,
    tolerance: float,
    divide_polylog: bool = False,
    d: float = 2.0,
    d1: float = 1.0,
    min_class_sets: int = 5,
    informative_only: bool = False,
) -> FitResult:
    """Least-squares slope of log2(class max chi) against log2(class size).

    Classes carrying fewer than min_class_sets sets are excluded (their max
    is noise); divide_polylog removes the log2(n)^(3/2 + 1/(2d)) factor
    before fitting so instances of different n share one line.

    informative_only drops classes whose envelope exceeds the trivial bound
    |chi(S)| <= |S| (sizes below about log2(n)^((3 + 1/d)/(1 + 1/d)) when
    d1 = 1). Any coloring satisfies the claim there, so those classes carry
    no information about the exponent.
    """
    xs, ys = [], []
    log_exp = 1.5 + 1.0 / (2.0 * d)
    for p in points:
        if p.count < min_class_sets or p.max_chi <= 0:
            continue
        if informative_only:
            env = (
                p.size_mid ** (0.5 - d1 / (2 * d))
                * p.n_pad ** ((d1 - 1) / (2 * d))
                * math.log2(p.n_pad) ** log_exp
            )
            if env >= p.size_mid:
                continue
        y = p.max_chi / (math.log2(p.n_pad) ** log_exp if divide_polylog else 1.0)
        xs.append(math.log2(p.size_mid))
        ys.append(math.log2(y))
    if len(xs) < 2:
        raise ValueError("not enough class points to fit")
    x = np.asarray(xs)
    y = np.asarray(ys)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return FitResult(
        slope=float(slope),
        intercept=float(intercept),
        r2=r2,
        points=len(xs),
        expected=expected,
        tolerance=tolerance,
        passed=abs(float(slope) - expected) <= tolerance,
    )


def _class_points(n: int, seed: int, report) -> list:
    out = []
    for i, chi in sorted(report.per_class_max_chi.items()):
        out.append(
            ClassPoint(
                n=n,
                seed=seed,
                class_i=i,
                count=report.per_class_count[i],
                size_mid=1.5 * report.n_pad / 2.0**i,
                max_chi=chi,
                n_pad=report.n_pad,
            )
        )
    return out


# -- runners --------------------------------------------------------------------


def _run_one(config: ExperimentConfig, n: int, seed: int) -> dict:
    gen_seed, color_seed = instance_seeds(config, n, seed)
    sys = build_instance(config.kind, n, gen_seed, config.family_cap)
    params = PipelineParams(d=config.d, d1=config.d1, mode=config.mode)
    t0 = time.perf_counter()
    res = full_coloring(sys, seed=color_seed, params=params)
    t_pipe = time.perf_counter() - t0
    ev = evaluate_sensitive(sys, res.coloring, d=config.d, d1=config.d1)

    t0 = time.perf_counter()
    rand = random_coloring(sys.n, seed=color_seed)
    t_rand = time.perf_counter() - t0
    ev_rand = evaluate_sensitive(sys, rand, d=config.d, d1=config.d1)
    return {
        "n": n,
        "seed": seed,
        "sys": sys,
        "pipeline": ev,
        "random": ev_rand,
        "disc_pipeline": discrepancy(sys, res.coloring).value,
        "disc_random": discrepancy(sys, rand).value,
        "wall_pipeline": t_pipe,
        "wall_random": t_rand,
    }


def _run_all(config: ExperimentConfig) -> list:
    jobs = [(n, seed) for n in config.ns for seed in config.seeds]
    workers = thread_count()
    if workers == 1:
        results = [_run_one(config, n, s) for n, s in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _run_one(config, *j), jobs))
    return sorted(results, key=lambda r: (r["n"], r["seed"]))


@dataclass(frozen=True)
class ScalingOutcome:
    fit_pipeline: FitResult
    fit_random: FitResult
    points_pipeline: list
    points_random: list
    files: list


def run_scaling(
    config: ExperimentConfig, expected: float = 0.25, tolerance: float = 0.15
) -> ScalingOutcome:
    """Scaling experiment: per-class max chi against class size, both methods.

    Emits results.csv (per-class argmax sets of the pipeline coloring),
    fit.json, and scaling.svg into config.out_dir.
    """
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    runs = _run_all(config)
    chash = config.config_hash()

    pts_pipe: list = []
    pts_rand: list = []
    csv_rows = []
    for r in runs:
        rep = r["pipeline"]
        pts_pipe += _class_points(r["n"], r["seed"], rep)
        pts_rand += _class_points(r["n"], r["seed"], r["random"])
        sizes = r["sys"].sizes
        for i in sorted(rep.per_class_argmax):
            sid = rep.per_class_argmax[i]
            chi = rep.per_class_max_chi[i]
            size = int(sizes[sid])
            env = (
                max(size, 1) ** (0.5 - config.d1 / (2 * config.d))
                * rep.n_pad ** ((config.d1 - 1) / (2 * config.d))
                * math.log2(rep.n_pad) ** rep.log_exponent
            )
            csv_rows.append(
                (
                    config.kind,
                    r["n"],
                    r["seed"],
                    sid,
                    size,
                    i,
                    _fmt(chi),
                    _fmt(env),
                    _fmt(chi / env),
                )
            )

    fit_pipe = fit_size_exponent(pts_pipe, expected, tolerance, divide_polylog=True, d=config.d)
    fit_rand = fit_size_exponent(pts_rand, expected, tolerance, divide_polylog=True, d=config.d)

    files = []
    files.append(_write_csv(os.path.join(config.out_dir, "results.csv"), RESULTS_COLUMNS, csv_rows, chash))
    fit_doc = {
        "config": config.science_dict(),
        "config_hash": chash,
        "version": __version__,
        "pipeline": fit_pipe.as_dict(),
        "random": fit_rand.as_dict(),
        "class_points": [
            {
                "method": m,
                "n": p.n,
                "seed": p.seed,
                "class_i": p.class_i,
                "count": p.count,
                "size_mid": _fmt(p.size_mid),
                "max_chi": _fmt(p.max_chi),
            }
            for m, plist in (("pipeline", pts_pipe), ("random", pts_rand))
            for p in plist
        ],
    }
    fit_path = os.path.join(config.out_dir, "fit.json")
    with open(fit_path, "w") as f:
        json.dump(fit_doc, f, indent=1, sort_keys=True)
        f.write("\n")
    files.append(fit_path)
    files.append(_scaling_svg(config, chash, pts_pipe, pts_rand, fit_pipe, fit_rand))
    _sidecar_log(config, runs)
    return ScalingOutcome(fit_pipe, fit_rand, pts_pipe, pts_rand, files)


def compare_baselines(config: ExperimentConfig) -> tuple[list, list]:
    """Random coloring against the pipeline on each instance.

    Returns (table rows as dicts incl. wall time, file paths); the emitted
    CSV carries only deterministic columns, timings go to the sidecar log.
    """
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    runs = _run_all(config)
    chash = config.config_hash()
    table = []
    csv_rows = []
    for r in runs:
        for method, ev, dv, wall in (
            ("pipeline", r["pipeline"], r["disc_pipeline"], r["wall_pipeline"]),
            ("random", r["random"], r["disc_random"], r["wall_random"]),
        ):
            table.append(
                {
                    "kind": config.kind,
                    "n": r["n"],
                    "seed": r["seed"],
                    "method": method,
                    "max_disc": dv,
                    "max_ratio": ev.max_ratio,
                    "wall_time": wall,
                }
            )
            csv_rows.append(
                (config.kind, r["n"], r["seed"], method, dv, _fmt(ev.max_ratio))
            )
    files = [
        _write_csv(os.path.join(config.out_dir, "baselines.csv"), BASELINES_COLUMNS, csv_rows, chash),
        _baselines_svg(config, chash, table),
    ]
    _sidecar_log(config, runs)
    return table, files


# -- emission -------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _write_csv(path: str, columns: tuple, rows: list, chash: str) -> str:
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row does not match schema")
    with open(path, "w") as f:
        f.write(f"# config={chash} version={__version__}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")
    return path


def _sidecar_log(config: ExperimentConfig, runs: list) -> None:
    path = os.path.join(config.out_dir, "run.log")
    with open(path, "a") as f:
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
        for r in runs:
            f.write(
                f"{stamp} config={config.config_hash()} kind={config.kind} n={r['n']} "
                f"seed={r['seed']} wall_pipeline={r['wall_pipeline']:.3f}s "
                f"wall_random={r['wall_random']:.3f}s\n"
            )


_SVG_W, _SVG_H, _SVG_PAD = 640, 420, 56


def _svg_open(chash: str, title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f"<!-- config={chash} version={__version__} -->",
        f'<text x="{_SVG_W // 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{_SVG_PAD}" y="28" width="{_SVG_W - 2 * _SVG_PAD}" '
        f'height="{_SVG_H - 2 * _SVG_PAD - 28}" fill="none" stroke="black"/>',
    ]


def _scale(v: float, lo: float, hi: float, a: float, b: float) -> float:
    if hi <= lo:
        return (a + b) / 2
    return a + (v - lo) / (hi - lo) * (b - a)


def _scaling_svg(config, chash, pts_pipe, pts_rand, fit_p, fit_r) -> str:
    log_exp = 1.5 + 1.0 / (2.0 * config.d)
    series = []
    for name, pts, color in (("pipeline", pts_pipe, "#1f6fb2"), ("random", pts_rand, "#c23b22")):
        xy = [
            (math.log2(p.size_mid), math.log2(p.max_chi / math.log2(p.n_pad) ** log_exp))
            for p in pts
            if p.count >= 5 and p.max_chi > 0
        ]
        series.append((name, xy, color))
    allx = [x for _, xy, _ in series for x, _ in xy]
    ally = [y for _, xy, _ in series for _, y in xy]
    lox, hix, loy, hiy = min(allx), max(allx), min(ally), max(ally)
    x0, x1 = _SVG_PAD, _SVG_W - _SVG_PAD
    y0, y1 = _SVG_H - _SVG_PAD - 28, 28  # y flipped
    parts = _svg_open(chash, f"{config.kind}: class max chi vs size (log2/log2, polylog removed)")
    for (name, xy, color), fit in zip(series, (fit_p, fit_r)):
        for x, y in xy:
            cx = _scale(x, lox, hix, x0, x1)
            cy = _scale(y, loy, hiy, y0, y1)
            parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="3" fill="{color}"/>')
        ya, yb = fit.slope * lox + fit.intercept, fit.slope * hix + fit.intercept
        parts.append(
            f'<line x1="{x0:.1f}" y1="{_scale(ya, loy, hiy, y0, y1):.1f}" '
            f'x2="{x1:.1f}" y2="{_scale(yb, loy, hiy, y0, y1):.1f}" '
            f'stroke="{color}" stroke-dasharray="4 3"/>'
        )
        parts.append(
            f'<text x="{x0 + 8}" y="{y1 + 14 + 16 * (name == "random")}" font-size="12" '
            f'fill="{color}">{name}: slope {fit.slope:.3f} (r2 {fit.r2:.3f})</text>'
        )
    parts.append(f'<text x="{(x0 + x1) // 2}" y="{_SVG_H - 16}" text-anchor="middle" font-size="12">log2 class size</text>')
    parts.append("</svg>")
    path = os.path.join(config.out_dir, "scaling.svg")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
    return path


def _baselines_svg(config, chash, table) -> str:
    rows = sorted(
        (r for r in table), key=lambda r: (r["n"], r["seed"], r["method"])
    )
    parts = _svg_open(chash, f"{config.kind}: worst envelope ratio per instance")
    x0, x1 = _SVG_PAD, _SVG_W - _SVG_PAD
    y0, y1 = _SVG_H - _SVG_PAD - 28, 28
    top = max(r["max_ratio"] for r in rows) or 1.0
    bw = (x1 - x0) / max(len(rows), 1)
    for idx, r in enumerate(rows):
        h = _scale(r["max_ratio"], 0, top, 0, y0 - y1)
        color = "#1f6fb2" if r["method"] == "pipeline" else "#c23b22"
        parts.append(
            f'<rect x="{x0 + idx * bw + 1:.1f}" y="{y0 - h:.1f}" width="{max(bw - 2, 1):.1f}" '
            f'height="{h:.1f}" fill="{color}"/>'
        )
    parts.append(
        f'<text x="{x0 + 8}" y="{y1 + 14}" font-size="12" fill="#1f6fb2">pipeline</text>'
    )
    parts.append(
        f'<text x="{x0 + 8}" y="{y1 + 30}" font-size="12" fill="#c23b22">random</text>'
    )
    parts.append("</svg>")
    path = os.path.join(config.out_dir, "baselines.svg")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
    return path
