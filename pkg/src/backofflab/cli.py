"""Command line entry point: ``backofflab {simulate,sweep,validate,oracle,report}``.

Exit codes: 0 ok, 2 configuration or input error, 3 assertion/oracle/validation
failure, 4 a run hit the horizon with packets left (only with ``--strict``).
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness
from .adversary import QueuingConstraint, validate_schedule
from .metrics import (MAX_EXACT_PACKETS, check_probability_bounds, contention,
                      exact_slot_probabilities, expected_H_delta, monte_carlo_slot_frequencies,
                      random_window_vectors)
from .policy import ConfigError, PolicyParams, min_valid_w_min
from .scenario import apply_overrides, from_document, load_document
from .serialize import TraceFormatError, schedule_from_trace_file

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_TRUNCATED = 0, 2, 3, 4
OUT_ENV = "BACKOFFLAB_OUT_DIR"


def _out_dir(arg: Optional[str]) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "backofflab-out")


def _parse_seeds(text: str) -> list[int]:
    """``1,2,5`` or ``10:20`` (half-open range)."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            seeds = list(range(int(lo), int(hi)))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}") from None
    if not seeds:
        raise ConfigError("empty seed list")
    return seeds


def _scenario_doc(args) -> dict:
    doc = load_document(args.scenario)
    overrides = list(args.override or [])
    if args.trace_level:
        overrides.append(f"trace_level={args.trace_level}")
    if args.checkpoint_stride:
        overrides.append(f"checkpoint_stride={args.checkpoint_stride}")
    doc = apply_overrides(doc, overrides)
    if args.seed is not None:
        doc["seeds"] = [args.seed]
    elif args.seeds:
        doc["seeds"] = _parse_seeds(args.seeds)
    if args.trace_level and isinstance(doc, dict):
        outputs = list(doc.get("outputs", ["summary-json"]))
        if "trace-jsonl" not in outputs:
            doc["outputs"] = outputs + ["trace-jsonl"]
    return doc


def _report_ensemble(ens) -> None:
    agg = ens.aggregates
    def fmt(x):
        return "-" if x is None else f"{x:.6g}"
    print(f"{ens.scenario}: {len(ens.seeds)} seed(s)")
    for name in harness.AGGREGATED:
        a = agg[name]
        print(f"  {name:24s} median {fmt(a['median'])}  mean {fmt(a['mean'])}  "
              f"p05 {fmt(a['p05'])}  p95 {fmt(a['p95'])}")


def cmd_simulate(args) -> int:
    doc = _scenario_doc(args)
    sc = from_document(doc)
    out = _out_dir(args.out)
    ens = harness.run_ensemble(sc, out, jobs=args.jobs)
    _report_ensemble(ens)
    print(f"artifacts: {out / sc.name}")
    if (args.strict or sc.strict) and ens.truncated:
        bad = [s for s, r in zip(ens.seeds, ens.per_seed) if r.truncated]
        print(f"truncated at horizon: seeds {bad}", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc = _scenario_doc(args)
    values = [v for v in (args.values or "").split(",") if v.strip()]
    res = harness.run_sweep(doc, args.axis, values, _out_dir(args.out), jobs=args.jobs)
    for v, ens in zip(res.values, res.ensembles):
        a = ens.aggregates
        print(f"{args.axis}={v}: throughput median {a['throughput']['median']}, "
              f"max accesses median {a['max_accesses']['median']}")
    strict = args.strict or bool(doc.get("strict"))
    if strict and any(e.truncated for e in res.ensembles):
        return EXIT_TRUNCATED
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        inj, jam = schedule_from_trace_file(args.trace)
    except OSError as exc:
        print(f"cannot read trace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep = validate_schedule((inj, jam), QueuingConstraint(args.lam, args.S))
    if rep.ok:
        print(f"OK (budget {rep.budget}, max window load {rep.max_load})")
        return EXIT_OK
    lo, hi = rep.violation
    print(f"VIOLATION window [{lo}, {hi}]: load exceeds budget {rep.budget} "
          f"(max window load {rep.max_load})")
    return EXIT_FAIL


def _given_vectors(args) -> Optional[list]:
    if not args.windows:
        return None
    vecs = []
    for group in args.windows:
        try:
            vecs.append(np.array([float(x) for x in group.split(",") if x.strip()]))
        except ValueError:
            raise ConfigError(f"cannot parse window vector {group!r}") from None
    for v in vecs:
        if v.size == 0 or v.size > MAX_EXACT_PACKETS:
            raise ConfigError(f"exact mode needs 1..{MAX_EXACT_PACKETS} windows, got {v.size}")
        if np.any(v < 2):
            raise ConfigError("windows must be >= 2")
    return vecs


def _random_vectors(args, w_lo: float):
    if args.n_max > MAX_EXACT_PACKETS:
        raise ConfigError(f"exact mode supports n <= {MAX_EXACT_PACKETS}, got {args.n_max}")
    rng = np.random.default_rng(args.rng_seed)
    return random_window_vectors(args.vectors, args.n_max, w_lo, args.w_max, rng)


def cmd_oracle(args) -> int:
    mode = args.mode
    if mode == "bounds":
        vecs = _given_vectors(args) or _random_vectors(args, args.w_min)
        bad = 0
        for v in vecs:
            rep = check_probability_bounds(v)
            total = rep.p_emp + rep.p_suc + rep.p_noi
            if not rep.ok or abs(total - 1.0) > 1e-12:
                bad += 1
                if bad <= 5:
                    worst = min(rep.margins, key=rep.margins.get)
                    print(f"violation n={v.size} C={rep.C:.6g}: {worst} margin {rep.margins[worst]:.3g}")
        print(f"bounds: {len(vecs) - bad}/{len(vecs)} vectors pass")
        return EXIT_OK if bad == 0 else EXIT_FAIL

    if mode == "montecarlo":
        vecs = _given_vectors(args) or _random_vectors(args, args.w_min)
        rng = np.random.default_rng(args.rng_seed + 1)
        outside = 0
        for v in vecs:
            exact = exact_slot_probabilities(v)
            emp = monte_carlo_slot_frequencies(v, args.trials, rng)
            cells = []
            for p, f in zip(exact, emp):
                sigma = math.sqrt(p * (1 - p) / args.trials)
                ok = abs(f - p) <= 3 * sigma + 1e-15
                outside += not ok
                cells.append(f"{f:.6f}/{p:.6f}{'' if ok else '!'}")
            print(f"n={v.size} C={contention(v):.4f}  emp/exact  " + "  ".join(cells))
        comparisons = 3 * len(vecs)
        allowed = args.allow if args.allow is not None else comparisons // 30
        print(f"montecarlo: {outside}/{comparisons} outside 3 sigma (allowed {allowed})")
        return EXIT_OK if outside <= allowed else EXIT_FAIL

    # hdelta
    c = args.c
    lo = max(args.w_min, min_valid_w_min(c))
    vecs = _given_vectors(args) or _random_vectors(args, lo)
    bad = 0
    for v in vecs:
        C = contention(v)
        d = expected_H_delta(v, args.state, c)
        bound = -C / (2 * c) if args.state == "noisy" else 2 * C / c
        if d > bound:
            bad += 1
            if bad <= 5:
                print(f"violation n={v.size} C={C:.6g}: E[dH]={d:.6g} > {bound:.6g}")
    print(f"hdelta ({args.state}, c={c:g}): {len(vecs) - bad}/{len(vecs)} vectors pass")
    return EXIT_OK if bad == 0 else EXIT_FAIL


def cmd_report(args) -> int:
    out = _out_dir(args.out) / "report" if args.out is None else Path(args.out)
    files = harness.build_report(args.dirs, out)
    for f in files:
        print(f)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="backofflab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def scenario_flags(sp):
        sp.add_argument("--scenario", required=True, help="scenario YAML/JSON file")
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--seed", type=int, help="run this single seed")
        g.add_argument("--seeds", help="seed list '1,2,3' or range 'lo:hi'")
        sp.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./backofflab-out)")
        sp.add_argument("--jobs", type=int, default=1, help="parallel seed runs")
        sp.add_argument("--trace-level", choices=["summary", "checkpoints", "full"])
        sp.add_argument("--checkpoint-stride", type=int)
        sp.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="dotted config override, repeatable")
        sp.add_argument("--strict", action="store_true", help="exit 4 if any run is truncated")

    sp = sub.add_parser("simulate", help="run every seed of a scenario")
    scenario_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run a scenario over values of one numeric parameter")
    scenario_flags(sp)
    sp.add_argument("--axis", required=True, help="parameter name or dotted path, e.g. n, c, arrivals.lam")
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate", help="check a trace against the (lambda, S) budget")
    sp.add_argument("trace")
    sp.add_argument("--lam", "--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--S", "-S", dest="S", type=int, required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("oracle", help="exact-enumeration checks of the slot oracles")
    sp.add_argument("mode", choices=["bounds", "montecarlo", "hdelta"])
    sp.add_argument("--windows", action="append", metavar="W1,W2,...",
                    help="explicit window vector, repeatable (default: random vectors)")
    sp.add_argument("--vectors", type=int, default=10_000)
    sp.add_argument("--n-max", type=int, default=12)
    sp.add_argument("--w-min", type=float, default=PolicyParams.w_min)
    sp.add_argument("--w-max", type=float, default=1e6)
    sp.add_argument("--rng-seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=1_000_000)
    sp.add_argument("--allow", type=int, help="comparisons allowed outside 3 sigma")
    sp.add_argument("--state", choices=["noisy", "silent"], default="noisy")
    sp.add_argument("--c", type=float, default=PolicyParams.c)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("report", help="plot-ready CSVs from ensemble directories")
    sp.add_argument("dirs", nargs="+")
    sp.add_argument("--out", help="report directory (default <output root>/report)")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except harness.HarnessInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
