"""Stable JSON/CSV/JSONL encodings for summaries and traces.

Floats are written with 17 significant digits so every value survives a
round trip bit for bit. JSON keys keep insertion order.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

import numpy as np

from .channel import SlotState
from .engine import PacketRecord, SummaryStats, Trace, TraceLevel, summarize
from .metrics import Interval

SCHEMA_VERSION = 1


def fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj: Any) -> str:
    """Compact, deterministic JSON."""
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, enum.Enum):
        return dumps(obj.value)
    if isinstance(obj, int):
        return str(int(obj))
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def csv_cell(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "" if math.isnan(x) else format(x, ".17g")
    if isinstance(x, enum.Enum):
        return str(x.value)
    return str(x)


def write_csv(path: Path, header: list, rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([csv_cell(x) for x in row])


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summary_document(scenario: str, seed: int, config: dict, summary: SummaryStats) -> dict:
    return {"schema_version": SCHEMA_VERSION, "scenario": scenario, "seed": seed,
            "config": config, "summary": summary.to_dict()}


# --- trace JSONL ------------------------------------------------------------

def _slot_record(trace: Trace, i: int, cum: dict) -> dict:
    cls = trace.contention_class[i]
    dep = trace.departed[i]
    phi = trace.phi[i]
    return {
        "kind": "slot", "t": i + 1, "injections": trace.injections[i],
        "adaptive_jam": bool(trace.adaptive_jam[i]), "reactive_jam": bool(trace.reactive_jam[i]),
        "senders": trace.senders[i], "listeners": trace.listeners[i],
        "state": SlotState(trace.state[i]).name.lower(),
        "departed": None if dep < 0 else dep,
        "contention": trace.contention[i],
        "contention_class": None if cls < 0 else ("low", "good", "high")[cls],
        "active": trace.active[i],
        "T": int(cum["T"][i]), "S": int(cum["S"][i]), "N": int(cum["N"][i]), "J": int(cum["J"][i]),
        "phi": None if math.isnan(phi) else phi,
    }


def trace_lines(trace: Trace, meta: dict, status: str, level: TraceLevel,
                checkpoint_stride: int) -> Iterator[str]:
    level = TraceLevel(level)
    yield dumps({"kind": "header", "schema_version": SCHEMA_VERSION, "level": level.value,
                 "checkpoint_stride": checkpoint_stride, **meta})
    n = len(trace)
    cum = trace.cumulative()
    if level is TraceLevel.FULL:
        slots = range(n)
    else:
        slots = [i for i in range(n) if (i + 1) % checkpoint_stride == 0 or i == n - 1]
    for i in slots:
        yield dumps(_slot_record(trace, i, cum))
    if level is not TraceLevel.FULL:
        # sparse adversary schedule so any trace level can be validated
        for i in range(n):
            if trace.injections[i] or trace.jammed[i]:
                yield dumps({"kind": "adversary", "t": i + 1, "injections": trace.injections[i],
                             "jammed": bool(trace.jammed[i])})
    for iv in trace.intervals:
        yield dumps({"kind": "interval", "index": iv.index, "start": iv.start, "tau": iv.tau,
                     "length": iv.length, "arrivals": iv.arrivals, "jams": iv.jams,
                     "phi_start": iv.phi_start, "phi_end": iv.phi_end, "low": iv.low,
                     "good": iv.good, "high": iv.high})
    for p in trace.packets:
        yield dumps({"kind": "packet", "id": p.id, "arrival": p.arrival, "departure": p.departure,
                     "accesses": p.accesses, "peak_window": p.peak_window})
    yield dumps({"kind": "end", "status": status, "slots": n})


def write_trace(path: Path, trace: Trace, meta: dict, status: str, level: TraceLevel,
                checkpoint_stride: int) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in trace_lines(trace, meta, status, level, checkpoint_stride):
            fh.write(line)
            fh.write("\n")


_STATE = {"empty": 0, "success": 1, "noisy": 2}
_CLASS = {None: -1, "low": 0, "good": 1, "high": 2}


class TraceFormatError(ValueError):
    pass


def read_trace(path, schedule: Optional[list] = None) -> tuple[Trace, dict, dict]:
    """Load a trace JSONL file. Returns ``(trace, header, end_record)``.

    Slot records must be complete and consecutive (a full-level trace) for
    the returned ``Trace`` to be usable for recomputation; checkpoint-level
    files load but only hold the sampled slots. If ``schedule`` is a list,
    sparse ``adversary`` records are appended to it as ``(t, injections, jammed)``.
    """
    trace = Trace()
    header: Optional[dict] = None
    end: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            kind = rec.get("kind")
            if kind == "header":
                header = rec
            elif kind == "slot":
                trace.injections.append(rec["injections"])
                trace.adaptive_jam.append(rec["adaptive_jam"])
                trace.reactive_jam.append(rec["reactive_jam"])
                trace.jammed.append(rec["adaptive_jam"] or rec["reactive_jam"])
                trace.senders.append(rec["senders"])
                trace.listeners.append(rec["listeners"])
                trace.state.append(_STATE[rec["state"]])
                trace.departed.append(-1 if rec["departed"] is None else rec["departed"])
                trace.contention.append(rec["contention"])
                trace.contention_class.append(_CLASS[rec["contention_class"]])
                trace.active.append(rec["active"])
                trace.phi.append(float("nan") if rec["phi"] is None else rec["phi"])
            elif kind == "interval":
                trace.intervals.append(Interval(
                    index=rec["index"], start=rec["start"], tau=rec["tau"], length=rec["length"],
                    arrivals=rec["arrivals"], jams=rec["jams"], phi_start=rec["phi_start"],
                    phi_end=rec["phi_end"], low=rec["low"], good=rec["good"], high=rec["high"]))
            elif kind == "packet":
                trace.packets.append(PacketRecord(rec["id"], rec["arrival"], rec["departure"],
                                                  rec["accesses"], rec["peak_window"]))
            elif kind == "adversary":
                if schedule is not None:
                    schedule.append((rec["t"], rec["injections"], rec["jammed"]))
            elif kind == "end":
                end = rec
            else:
                raise TraceFormatError(f"{path}:{lineno}: unknown record kind {kind!r}")
    if header is None:
        raise TraceFormatError(f"{path}: missing header record")
    return trace, header, end


def summary_from_trace_file(path) -> SummaryStats:
    trace, header, end = read_trace(path)
    if header.get("level") != TraceLevel.FULL.value:
        raise TraceFormatError("summary recomputation needs a full-level trace")
    return summarize(trace, int(header["checkpoint_stride"]), end.get("status") == "horizon")


def schedule_from_trace_file(path) -> tuple:
    """Per-slot ``(injections, jammed)`` arrays from a trace file of any level."""
    sparse: list = []
    try:
        trace, header, end = read_trace(path, sparse)
    except (KeyError, TypeError) as exc:
        raise TraceFormatError(f"{path}: malformed record ({exc})") from None
    if header.get("level") == TraceLevel.FULL.value:
        return (np.asarray(trace.injections, dtype=np.int64),
                np.asarray(trace.jammed, dtype=np.int64))
    if "slots" not in end:
        raise TraceFormatError(f"{path}: missing end record")
    n = int(end["slots"])
    inj = np.zeros(n, dtype=np.int64)
    jam = np.zeros(n, dtype=np.int64)
    for t, k, j in sparse:
        if not 1 <= t <= n:
            raise TraceFormatError(f"{path}: adversary record at slot {t} outside 1..{n}")
        inj[t - 1] = k
        jam[t - 1] = int(bool(j))
    return inj, jam


def timeseries_rows(trace: Trace, stride: int) -> Iterator[list]:
    n = len(trace)
    cum = trace.cumulative()
    for i in range(n):
        if (i + 1) % stride and i != n - 1:
            continue
        S = int(cum["S"][i])
        T, N, J = int(cum["T"][i]), int(cum["N"][i]), int(cum["J"][i])
        phi = trace.phi[i]
        yield [SCHEMA_VERSION, i + 1, trace.active[i], T, S, N, J,
               (T + J) / S if S else None, (N + J) / S if S else None,
               trace.contention[i], None if math.isnan(phi) else phi]


TIMESERIES_HEADER = ["schema_version", "t", "active", "T", "S", "N", "J", "throughput",
                     "implicit_throughput", "contention", "phi"]
