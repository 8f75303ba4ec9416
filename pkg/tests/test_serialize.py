import json
import math
from pathlib import Path

import numpy as np
import pytest

from backofflab.engine import AdversarySpec, EngineConfig, TraceLevel, run
from backofflab.serialize import (TIMESERIES_HEADER, TraceFormatError, dumps, fmt_float, read_csv,
                                  read_trace, schedule_from_trace_file, summary_from_trace_file,
                                  timeseries_rows, write_csv, write_trace)

GOLDEN = Path(__file__).parent / "golden"


def small_run(level=TraceLevel.FULL, seed=21, **adv):
    spec = AdversarySpec(**adv) if adv else AdversarySpec(arrivals={"kind": "batch", "n": 24})
    return run(EngineConfig(adversary=spec, master_seed=seed, trace_level=level, checkpoint_stride=10))


def test_float_format_round_trips():
    for x in [0.1, 1.0, 1 / 3, 1e-300, 123456789.123456789, 2.0 ** 60, -5e-7]:
        s = fmt_float(x)
        assert float(s) == x
    assert fmt_float(1.0) == "1.0" and fmt_float(float("nan")) == "null"


def test_dumps_is_stable_json():
    doc = {"b": 1, "a": [1.5, None, True, "x"], "c": {"z": np.float64(0.25), "y": np.int64(3)}}
    text = dumps(doc)
    assert text == '{"b":1,"a":[1.5,null,true,"x"],"c":{"z":0.25,"y":3}}'
    assert json.loads(text)["c"]["y"] == 3
    with pytest.raises(TypeError):
        dumps(object())


def test_summary_recomputed_from_full_trace(tmp_path):
    for adv in ({}, {"arrivals": {"kind": "queuing", "lam": 0.05, "S": 200},
                     "adaptive_jam": {"kind": "random", "p": 0.01}}):
        res = run(EngineConfig(adversary=AdversarySpec(**adv), master_seed=5, horizon=3000,
                               trace_level=TraceLevel.FULL, checkpoint_stride=10))
        path = tmp_path / "t.jsonl"
        write_trace(path, res.trace, {"seed": 5}, res.summary.status, TraceLevel.FULL, 10)
        again = summary_from_trace_file(path)
        assert dumps(again.to_dict()) == dumps(res.summary.to_dict())


def test_trace_round_trip_preserves_columns(tmp_path):
    res = small_run()
    path = tmp_path / "t.jsonl"
    write_trace(path, res.trace, {}, res.summary.status, TraceLevel.FULL, 10)
    tr, header, end = read_trace(path)
    assert header["schema_version"] == 1 and end == {"kind": "end", "status": "drained",
                                                     "slots": len(res.trace)}
    for col in ("injections", "state", "senders", "listeners", "departed", "active"):
        assert list(getattr(tr, col)) == list(getattr(res.trace, col))
    assert list(tr.contention) == list(res.trace.contention)
    assert list(tr.phi) == list(res.trace.phi)
    assert tr.packets == res.trace.packets
    assert [iv.__dict__ for iv in tr.intervals] == [iv.__dict__ for iv in res.trace.intervals]


def test_checkpoint_trace_keeps_full_schedule(tmp_path):
    res = run(EngineConfig(adversary=AdversarySpec(
        arrivals={"kind": "queuing", "lam": 0.1, "S": 100, "jam_share": 0.5}),
        horizon=2000, master_seed=1))
    for level in TraceLevel:
        path = tmp_path / f"{level.value}.jsonl"
        write_trace(path, res.trace, {}, res.summary.status, level, 50)
        inj, jam = schedule_from_trace_file(path)
        assert inj.tolist() == list(res.trace.injections)
        assert jam.tolist() == list(res.trace.jammed)


def test_recompute_needs_full_trace(tmp_path):
    res = small_run(TraceLevel.CHECKPOINTS)
    path = tmp_path / "t.jsonl"
    write_trace(path, res.trace, {}, res.summary.status, TraceLevel.CHECKPOINTS, 10)
    with pytest.raises(TraceFormatError):
        summary_from_trace_file(path)


def test_bad_trace_files(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"kind": "slot"\n')
    with pytest.raises(TraceFormatError):
        read_trace(p)
    p.write_text('{"kind": "mystery"}\n')
    with pytest.raises(TraceFormatError):
        read_trace(p)
    p.write_text('{"kind": "end", "status": "drained", "slots": 0}\n')
    with pytest.raises(TraceFormatError):
        read_trace(p)


def test_csv_is_rfc4180(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b"], [[1, 'say "hi", ok'], [0.1, None]])
    raw = p.read_bytes()
    assert raw == b'a,b\r\n1,"say ""hi"", ok"\r\n0.10000000000000001,\r\n'
    assert read_csv(p)[0]["b"] == 'say "hi", ok'


def test_golden_summary_and_timeseries():
    res = small_run()
    summary = dumps(res.summary.to_dict())
    assert summary == (GOLDEN / "summary_batch24_seed21.json").read_text().strip()
    rows = list(timeseries_rows(res.trace, 10))
    assert TIMESERIES_HEADER == (GOLDEN / "timeseries_header.txt").read_text().strip().split(",")
    assert rows[-1][1] == len(res.trace) and rows[0][0] == 1
