"""Multi-seed runner, sweeps and report tables.

Layout on disk::

    <out>/<scenario>/ensemble.json
    <out>/<scenario>/per_seed.csv
    <out>/<scenario>/seed-<s>/summary.json | timeseries.csv | trace.jsonl | access_histogram.csv

A sweep writes ``<out>/<scenario>-sweep-<axis>/`` holding one ensemble
directory per value plus ``sweep.csv`` and ``sweep.json``.
"""
from __future__ import annotations

import copy
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import serialize as ser
from .engine import SummaryStats, TraceLevel, run
from .policy import ConfigError
from .scenario import SCHEMA, ScenarioConfig, from_document

AGGREGATED = ("throughput", "min_implicit_throughput", "makespan", "max_accesses",
              "median_accesses", "max_window", "max_backlog", "max_phi")
STATS = ("mean", "median", "p05", "p95")
SUMMARY_FIELDS = [f.name for f in fields(SummaryStats)]


class HarnessInputError(RuntimeError):
    """Missing or unreadable artifacts."""


@dataclass
class EnsembleSummary:
    scenario: str
    seeds: list
    per_seed: list          # SummaryStats, in seed-list order
    aggregates: dict

    @property
    def truncated(self) -> bool:
        return any(s.truncated for s in self.per_seed)


def aggregate(per_seed: Sequence[SummaryStats]) -> dict:
    """mean/median/p05/p95 per metric; runs where a metric is undefined are skipped."""
    out = {}
    for name in AGGREGATED:
        vals = np.array([getattr(s, name) for s in per_seed if getattr(s, name) is not None],
                        dtype=np.float64)
        if vals.size == 0:
            out[name] = {k: None for k in STATS} | {"n": 0}
            continue
        p05, med, p95 = np.percentile(vals, [5, 50, 95])
        out[name] = {"mean": float(vals.mean()), "median": float(med),
                     "p05": float(p05), "p95": float(p95), "n": int(vals.size)}
    return out


def _config_for_record(sc: ScenarioConfig) -> dict:
    doc = copy.deepcopy(sc.raw)
    doc.pop("seeds", None)
    return doc


def _run_seed(doc: dict, seed: int, seed_dir: Optional[str]) -> dict:
    sc = from_document(doc)
    cfg = sc.engine_config(seed)
    result = run(cfg)
    summary = result.summary
    if seed_dir is not None:
        d = Path(seed_dir)
        d.mkdir(parents=True, exist_ok=True)
        outputs = set(sc.outputs)
        if "summary-json" in outputs:
            text = ser.dumps(ser.summary_document(sc.name, seed, _config_for_record(sc), summary))
            (d / "summary.json").write_text(text + "\n", encoding="utf-8")
        if "timeseries-csv" in outputs:
            ser.write_csv(d / "timeseries.csv", ser.TIMESERIES_HEADER,
                          ser.timeseries_rows(result.trace, sc.checkpoint_stride))
        if "trace-jsonl" in outputs:
            ser.write_trace(d / "trace.jsonl", result.trace,
                            {"scenario": sc.name, "seed": seed}, summary.status,
                            sc.trace_level, sc.checkpoint_stride)
        if "access-histogram-csv" in outputs:
            hist = Counter(p.accesses for p in result.trace.packets)
            ser.write_csv(d / "access_histogram.csv", ["schema_version", "accesses", "count"],
                          ([ser.SCHEMA_VERSION, k, hist[k]] for k in sorted(hist)))
    return summary.to_dict()


def run_ensemble(sc: ScenarioConfig, out: Optional[Path] = None, jobs: int = 1) -> EnsembleSummary:
    """Run every seed of ``sc``. With ``out`` set, artifacts go to ``out/<name>``."""
    doc = copy.deepcopy(sc.raw)
    root = Path(out) / sc.name if out is not None else None
    dirs = [str(root / f"seed-{s}") if root is not None else None for s in sc.seeds]
    if jobs > 1 and len(sc.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_seed, [doc] * len(sc.seeds), sc.seeds, dirs))
    else:
        results = [_run_seed(doc, s, d) for s, d in zip(sc.seeds, dirs)]
    per_seed = [SummaryStats(**r) for r in results]
    ens = EnsembleSummary(sc.name, list(sc.seeds), per_seed, aggregate(per_seed))
    if root is not None:
        write_ensemble(root, sc, ens)
    return ens


def write_ensemble(root: Path, sc: ScenarioConfig, ens: EnsembleSummary) -> None:
    root.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": ser.SCHEMA_VERSION, "scenario": sc.name,
           "config": _config_for_record(sc), "seeds": ens.seeds,
           "per_seed": [{"seed": s, **r.to_dict()} for s, r in zip(ens.seeds, ens.per_seed)],
           "aggregates": ens.aggregates}
    (root / "ensemble.json").write_text(ser.dumps(doc) + "\n", encoding="utf-8")
    ser.write_csv(root / "per_seed.csv", ["schema_version", "seed"] + SUMMARY_FIELDS,
                  ([ser.SCHEMA_VERSION, s] + [getattr(r, f) for f in SUMMARY_FIELDS]
                   for s, r in zip(ens.seeds, ens.per_seed)))


# --- sweeps -------------------------------------------------------------------

AXIS_ALIASES = {
    "n": "arrivals.n", "N": "arrivals.n", "batch_n": "arrivals.n",
    "rate": "arrivals.rate", "lam": "arrivals.lam", "S": "arrivals.S",
    "jam_share": "arrivals.jam_share",
    "c": "policy.c", "w_min": "policy.w_min", "p": "policy.p",
    "j": "jamming.adaptive.j", "jam_p": "jamming.adaptive.p",
    "threshold": "jamming.adaptive.threshold", "budget": "jamming.reactive.budget",
    "alpha1": "potential.alpha1", "alpha2": "potential.alpha2", "alpha3": "potential.alpha3",
    "c_tau": "potential.c_tau", "c_low": "potential.c_low", "c_high": "potential.c_high",
    "horizon": "horizon", "checkpoint_stride": "checkpoint_stride",
}


def _schema_node(path: str) -> Optional[dict]:
    node = SCHEMA
    for part in path.split("."):
        props = node.get("properties") if isinstance(node, dict) else None
        if not props or part not in props:
            return None
        node = props[part]
    return node


def resolve_axis(axis: str) -> tuple[str, str]:
    """Return ``(dotted path, json type)`` for a numeric sweep axis."""
    path = AXIS_ALIASES.get(axis, axis)
    node = _schema_node(path)
    if node is None:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    kind = node.get("type")
    if kind not in ("number", "integer"):
        raise ConfigError(f"sweep axis {axis!r} is not numeric")
    return path, kind


def _set_path(doc: dict, path: str, value) -> None:
    parts = path.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def _axis_value(raw, kind: str):
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"sweep value {raw!r} is not a number") from None
    if kind == "integer":
        if not v.is_integer():
            raise ConfigError(f"sweep value {raw!r} must be an integer")
        return int(v)
    return v


@dataclass
class SweepResult:
    axis: str
    path: str
    values: list
    ensembles: list


def run_sweep(doc: dict, axis: str, values: Iterable, out: Optional[Path] = None,
              jobs: int = 1) -> SweepResult:
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    path, kind = resolve_axis(axis)
    values = [_axis_value(v, kind) for v in values]
    base_name = doc.get("name", "sweep")
    root = Path(out) / f"{base_name}-sweep-{axis}" if out is not None else None
    scenarios = []
    for v in values:
        d = copy.deepcopy(doc)
        _set_path(d, path, v)
        d["name"] = f"{axis}={v}"
        scenarios.append(from_document(d))   # validate all before running any
    ensembles = [run_ensemble(sc, root, jobs) for sc in scenarios]
    if root is not None:
        header = ["schema_version", "axis", "value"] + [f"{m}_{s}" for m in AGGREGATED for s in STATS]
        rows = [[ser.SCHEMA_VERSION, axis, v] + [e.aggregates[m][s] for m in AGGREGATED for s in STATS]
                for v, e in zip(values, ensembles)]
        ser.write_csv(root / "sweep.csv", header, rows)
        (root / "sweep.json").write_text(ser.dumps({
            "schema_version": ser.SCHEMA_VERSION, "axis": axis, "path": path, "values": values,
            "ensembles": [sc.name for sc in scenarios]}) + "\n", encoding="utf-8")
    return SweepResult(axis, path, values, ensembles)


# --- reports ------------------------------------------------------------------

def _ensemble_dirs(paths: Iterable) -> list[Path]:
    found = []
    for p in map(Path, paths):
        if not p.is_dir():
            raise HarnessInputError(f"no such directory: {p}")
        if (p / "ensemble.json").is_file():
            found.append(p)
        elif (p / "sweep.json").is_file():
            meta = json.loads((p / "sweep.json").read_text(encoding="utf-8"))
            for name in meta["ensembles"]:
                sub = p / name
                if not (sub / "ensemble.json").is_file():
                    raise HarnessInputError(f"sweep member missing: {sub}")
                found.append(sub)
        else:
            raise HarnessInputError(f"{p} holds neither ensemble.json nor sweep.json")
    if not found:
        raise HarnessInputError("no ensemble directories given")
    return found


def _population(ens: dict) -> Optional[float]:
    arrivals = ens["config"].get("arrivals", {})
    if arrivals.get("kind") == "batch":
        return arrivals["n"]
    packets = [r["packets"] for r in ens["per_seed"]]
    return float(np.median(packets)) if packets else None


def build_report(paths: Iterable, out: Path) -> list[Path]:
    """Write tidy and per-figure CSVs under ``out``; returns the files written."""
    dirs = _ensemble_dirs(paths)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ensembles = []
    for d in dirs:
        try:
            ensembles.append((d, json.loads((d / "ensemble.json").read_text(encoding="utf-8"))))
        except (OSError, json.JSONDecodeError) as exc:
            raise HarnessInputError(f"cannot read {d / 'ensemble.json'}: {exc}") from None

    v = ser.SCHEMA_VERSION
    tidy = []
    for _, ens in ensembles:
        for rec in ens["per_seed"]:
            for metric in SUMMARY_FIELDS:
                tidy.append([v, ens["scenario"], rec["seed"], metric, rec[metric]])
    written = [out / "tidy.csv"]
    ser.write_csv(written[-1], ["schema_version", "scenario", "seed", "metric", "value"], tidy)

    thr, acc = [], []
    for _, ens in ensembles:
        n = _population(ens)
        agg = ens["aggregates"]
        thr.append([v, ens["scenario"], n] + [agg["throughput"][s] for s in STATS])
        log4 = math.log(n) ** 4 if n and n > 1 else None
        acc.append([v, ens["scenario"], n] + [agg["max_accesses"][s] for s in STATS] + [log4])
    written.append(out / "throughput_vs_n.csv")
    ser.write_csv(written[-1], ["schema_version", "scenario", "N"] + [f"throughput_{s}" for s in STATS], thr)
    written.append(out / "max_accesses_vs_n.csv")
    ser.write_csv(written[-1], ["schema_version", "scenario", "N"]
                  + [f"max_accesses_{s}" for s in STATS] + ["log4_N"], acc)

    backlog, phi = [], []
    for d, ens in ensembles:
        for rec in ens["per_seed"]:
            seed_dir = d / f"seed-{rec['seed']}"
            ts = seed_dir / "timeseries.csv"
            if ts.is_file():
                for row in ser.read_csv(ts):
                    backlog.append([v, ens["scenario"], rec["seed"], int(row["t"]), int(row["active"])])
            tr = seed_dir / "trace.jsonl"
            if tr.is_file():
                trace, _, _ = ser.read_trace(tr)
                for iv in trace.intervals:
                    phi.append([v, ens["scenario"], rec["seed"], iv.index, iv.start, iv.length,
                                iv.phi_start, iv.phi_end, iv.arrivals, iv.jams, iv.delta_phi])
    written.append(out / "backlog_vs_time.csv")
    ser.write_csv(written[-1], ["schema_version", "scenario", "seed", "t", "active"], backlog)
    written.append(out / "phi_vs_interval.csv")
    ser.write_csv(written[-1], ["schema_version", "scenario", "seed", "interval", "start", "length",
                                "phi_start", "phi_end", "A", "J", "delta_phi"], phi)
    return written
