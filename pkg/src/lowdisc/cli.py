"""Command line driver.

Exit codes: 0 success, 2 invalid arguments or config, 3 I/O failure,
4 hard verification or pipeline failure, 1 unexpected error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from fractions import Fraction

import numpy as np

from . import __version__
from .approx import HalvingParams, relative_approx_by_halving, verify_relative_approx
from .bench import KINDS, ExperimentConfig, build_instance, compare_baselines, run_scaling
from .coloring import PipelineParams, WalkContractError, full_coloring
from .generators import PointSet, gen_points, load_points, save_points
from .packing import greedy_packing, save_packing, verify_maximal, verify_separated
from .setsystem import load_json, save_coloring, save_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VERIFY = 4


def _ratio(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"not a ratio: {text!r}") from e


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(",") if t)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}") from e


def _load_input(path: str):
    """Points or set-system JSON, told apart by their fields."""
    with open(path) as f:
        doc = json.load(f)
    if "points" in doc:
        return PointSet.from_json_dict(doc)
    return load_json(path)


def _instance_from(doc, kind: str | None, family_cap: int, seed: int):
    from .generators import halfspace_ranges, interval_ranges, interval_ranges_thinned

    if isinstance(doc, PointSet):
        if doc.dim == 1:
            m_full = doc.n * (doc.n + 1) // 2 + 1
            if m_full > family_cap:
                return interval_ranges_thinned(doc, max_sets=family_cap, seed=seed)
            return interval_ranges(doc)
        cap = None if doc.n * (doc.n - 1) + 2 <= family_cap else family_cap
        return halfspace_ranges(doc, max_ranges=cap, seed=seed)
    return doc


def cmd_gen(args) -> int:
    dim = {"intervals": 1, "halfplanes": 2, "halfspaces3d": 3}.get(args.kind)
    if dim is None and args.kind != "abstract":
        print(f"gen: unsupported kind {args.kind}", file=_sys.stderr)
        return EXIT_CONFIG
    if args.kind == "abstract":
        from .generators import random_abstract_system

        sys_ = random_abstract_system(args.n, m=4 * args.n, density=0.3, seed=args.seed)
        save_json(sys_, args.out)
    else:
        pts = gen_points(args.n, dim, args.dist, seed=args.seed)
        save_points(pts, args.out)
    print(f"gen: wrote {args.out}")
    return EXIT_OK


def cmd_pack(args) -> int:
    src = _load_input(args.input)
    sys_ = _instance_from(src, None, args.family_cap, args.seed)
    pk = greedy_packing(sys_, delta=args.delta, order=args.order, seed=args.seed)
    ok_sep, wit_sep = verify_separated(sys_, pk)
    ok_max, wit_max = verify_maximal(sys_, pk)
    save_packing(pk, args.out)
    print(
        f"pack: delta={args.delta} members={len(pk.members)} "
        f"separated={ok_sep} maximal={ok_max} -> {args.out}"
    )
    if not (ok_sep and ok_max):
        print(f"pack: verification failed (witnesses {wit_sep}, {wit_max})", file=_sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_color(args) -> int:
    src = _load_input(args.input)
    sys_ = _instance_from(src, None, args.family_cap, args.seed)
    params = PipelineParams(d=args.d, d1=args.d1, mode=args.mode)
    res = full_coloring(sys_, seed=args.seed, params=params)
    save_coloring(res.coloring, args.out)
    trace_path = args.out + ".trace.json"
    with open(trace_path, "w") as f:
        f.write(res.trace_json())
        f.write("\n")
    print(
        f"color: n={sys_.n} m={sys_.m} rounds={len(res.rounds)} "
        f"budget_ok={all(t.budget <= t.budget_threshold for t in res.rounds)} -> {args.out}"
    )
    return EXIT_OK


def cmd_approx(args) -> int:
    src = _load_input(args.input)
    params = HalvingParams(d=args.d, d1=args.d1)
    z, trace = relative_approx_by_halving(src, args.eps, args.delta, seed=args.seed, params=params)
    doc = {"z": [int(i) for i in z], "trace": trace.to_json_dict(), "version": __version__}
    with open(args.out, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    print(
        f"approx: |Z|={trace.z_size} of {trace.n0} stop={trace.stop_reason} "
        f"final_pass={trace.final_pass} -> {args.out}"
    )
    return EXIT_OK if trace.final_pass else EXIT_VERIFY


def cmd_bench(args) -> int:
    config = ExperimentConfig(
        kind=args.kind,
        ns=args.n,
        seeds=tuple(range(args.seeds)) if isinstance(args.seeds, int) else args.seeds,
        mode=args.mode,
        d=args.d,
        d1=args.d1,
        family_cap=args.family_cap,
        out_dir=args.out,
    )
    if args.bench_cmd == "scaling":
        out = run_scaling(config, expected=args.expected, tolerance=args.tolerance)
        print(
            f"bench scaling: pipeline slope {out.fit_pipeline.slope:.3f} "
            f"(pass={out.fit_pipeline.passed}) random slope {out.fit_random.slope:.3f}"
        )
        for f in out.files:
            print(f"  wrote {f}")
        return EXIT_OK
    table, files = compare_baselines(config)
    for row in table:
        print(
            f"  {row['kind']} n={row['n']} seed={row['seed']} {row['method']}: "
            f"disc={row['max_disc']} ratio={row['max_ratio']:.4f}"
        )
    for f in files:
        print(f"  wrote {f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowdisc", description=__doc__)
    p.add_argument("--version", action="version", version=f"lowdisc {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--kind", required=True, choices=KINDS)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dist", default="uniform-cube")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    pk = sub.add_parser("pack", help="greedy packing of an instance")
    pk.add_argument("--input", required=True)
    pk.add_argument("--delta", type=int, required=True)
    pk.add_argument("--order", default="input", choices=("input", "by-size-descending", "seeded-shuffle"))
    pk.add_argument("--seed", type=int, default=0)
    pk.add_argument("--family-cap", type=int, default=150_000, dest="family_cap")
    pk.add_argument("--out", required=True)
    pk.set_defaults(fn=cmd_pack)

    c = sub.add_parser("color", help="full low-discrepancy coloring")
    c.add_argument("--input", required=True)
    c.add_argument("--mode", default="calibrated", choices=("calibrated", "theory"))
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--d", type=float, default=2.0)
    c.add_argument("--d1", type=float, default=1.0)
    c.add_argument("--family-cap", type=int, default=150_000, dest="family_cap")
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_color)

    a = sub.add_parser("approx", help="relative approximation by halving")
    a.add_argument("--input", required=True)
    a.add_argument("--eps", type=_ratio, required=True)
    a.add_argument("--delta", type=_ratio, required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--d", type=float, default=2.0)
    a.add_argument("--d1", type=float, default=1.0)
    a.add_argument("--out", required=True)
    a.set_defaults(fn=cmd_approx)

    b = sub.add_parser("bench", help="experiments")
    bsub = b.add_subparsers(dest="bench_cmd", required=True)
    for name in ("scaling", "baselines"):
        bb = bsub.add_parser(name)
        bb.add_argument("--kind", required=True, choices=KINDS)
        bb.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
        bb.add_argument("--seeds", type=int, default=5, help="number of seeds (0..s-1)")
        bb.add_argument("--mode", default="calibrated", choices=("calibrated", "theory"))
        bb.add_argument("--d", type=float, default=2.0)
        bb.add_argument("--d1", type=float, default=1.0)
        bb.add_argument("--family-cap", type=int, default=150_000, dest="family_cap")
        bb.add_argument("--expected", type=float, default=0.25)
        bb.add_argument("--tolerance", type=float, default=0.15)
        bb.add_argument("--out", required=True)
        bb.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags already; keep its convention
        return int(e.code or 0)
    try:
        return args.fn(args)
    except (ValueError, TypeError) as e:
        print(f"lowdisc: invalid config: {e}", file=_sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"lowdisc: i/o error: {e}", file=_sys.stderr)
        return EXIT_IO
    except WalkContractError as e:
        print(f"lowdisc: pipeline contract failed: {e}", file=_sys.stderr)
        return EXIT_VERIFY
    except Exception as e:  # pragma: no cover
        print(f"lowdisc: unexpected: {type(e).__name__}: {e}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
