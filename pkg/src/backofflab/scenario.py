"""Scenario files: a YAML (or JSON) document describing one experiment.

Example::

    name: batch-1024
    policy: {kind: lowsense, c: 1.0, w_min: 128}
    arrivals: {kind: batch, n: 1024}
    jamming:
      adaptive: {kind: never}
      reactive: {kind: target, target: 0, budget: 32}
    potential: {alpha1: 4, alpha2: 2, alpha3: 1, c_tau: 4}
    horizon: 10000000
    seeds: {base: 1, count: 20}
    checkpoint_stride: 100
    trace_level: summary
    outputs: [summary-json, timeseries-csv]

Every key except ``name`` is optional; unknown keys are rejected.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema
import yaml

from .engine import DEFAULT_HORIZON, AdversarySpec, EngineConfig, TraceLevel
from .metrics import PotentialParams
from .policy import ConfigError, PolicyParams

OUTPUT_KINDS = ("summary-json", "timeseries-csv", "trace-jsonl", "access-histogram-csv")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}
_u64 = {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1}


def _kinded(kinds: dict) -> dict:
    """Schema for a ``{kind: ..., <params>}`` mapping with per-kind required keys."""
    props = {"kind": {"enum": sorted(kinds)}}
    for spec in kinds.values():
        props.update(spec["props"])
    return {
        "type": "object", "additionalProperties": False, "required": ["kind"],
        "properties": props,
        "allOf": [{"if": {"properties": {"kind": {"const": k}}},
                   "then": {"required": spec.get("required", [])}}
                  for k, spec in kinds.items()],
    }


SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name"],
    "properties": {
        "schema_version": {"const": 1},
        "name": {"type": "string", "minLength": 1, "pattern": r"^[A-Za-z0-9_.=+-]+$"},
        "policy": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["lowsense", "beb", "aloha"]},
                "c": _pos, "w_min": _pos, "success_as_full": {"type": "boolean"},
                "p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "arrivals": _kinded({
            "batch": {"props": {"n": {"type": "integer", "minimum": 1}}, "required": ["n"]},
            "bernoulli": {"props": {"rate": {"type": "number", "minimum": 0, "maximum": 1},
                                    "horizon": {"type": "integer", "minimum": 1}},
                          "required": ["rate"]},
            "queuing": {"props": {"lam": {"type": "number", "exclusiveMinimum": 0,
                                          "exclusiveMaximum": 1},
                                  "S": {"type": "integer", "minimum": 1},
                                  "pattern": {"enum": ["front_loaded", "spread", "adaptive_greedy"]},
                                  "jam_share": {"type": "number", "minimum": 0, "maximum": 1}},
                        "required": ["lam", "S"]},
        }),
        "jamming": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "adaptive": _kinded({
                    "never": {"props": {}},
                    "first": {"props": {"j": {"type": "integer", "minimum": 0}}, "required": ["j"]},
                    "random": {"props": {"p": {"type": "number", "minimum": 0, "maximum": 1}},
                               "required": ["p"]},
                    "contention": {"props": {"threshold": _num,
                                             "budget": {"type": "integer", "minimum": 0}},
                                   "required": ["threshold"]},
                }),
                "reactive": _kinded({
                    "none": {"props": {}},
                    "target": {"props": {"target": {"type": "integer", "minimum": 0},
                                         "budget": {"type": "integer", "minimum": 0}},
                               "required": ["target", "budget"]},
                    "any_send": {"props": {"budget": {"type": "integer", "minimum": 0}},
                                 "required": ["budget"]},
                }),
                "seed_offset": _int,
            },
        },
        "potential": {
            "type": "object", "additionalProperties": False,
            "properties": {k: _pos for k in ("alpha1", "alpha2", "alpha3", "c_tau", "c_low", "c_high")},
        },
        "horizon": {"type": "integer", "minimum": 1},
        "seeds": {
            "oneOf": [
                {"type": "array", "items": _u64, "minItems": 1},
                {"type": "object", "additionalProperties": False, "required": ["base", "count"],
                 "properties": {"base": _u64, "count": {"type": "integer", "minimum": 1}}},
            ],
        },
        "checkpoint_stride": {"type": "integer", "minimum": 1},
        "trace_level": {"enum": [lvl.value for lvl in TraceLevel]},
        "outputs": {"type": "array", "items": {"enum": list(OUTPUT_KINDS)}, "uniqueItems": True},
        "strict": {"type": "boolean"},
    },
}

DEFAULTS: dict = {
    "policy": {"kind": "lowsense", "c": PolicyParams.c, "w_min": PolicyParams.w_min,
               "success_as_full": True, "p": 0.1},
    "arrivals": {"kind": "batch", "n": 1},
    "jamming": {"adaptive": {"kind": "never"}, "reactive": {"kind": "none"}, "seed_offset": 0},
    "potential": {},
    "horizon": DEFAULT_HORIZON,
    "seeds": [0],
    "checkpoint_stride": 100,
    "trace_level": TraceLevel.SUMMARY.value,
    "outputs": ["summary-json"],
    "strict": False,
}


@dataclass
class ScenarioConfig:
    name: str
    raw: dict
    seeds: list
    checkpoint_stride: int
    trace_level: TraceLevel
    outputs: tuple
    strict: bool
    horizon: int
    base: EngineConfig = field(repr=False, default=None)

    def engine_config(self, seed: int) -> EngineConfig:
        from dataclasses import replace
        return replace(self.base, master_seed=int(seed))


def validate_document(doc: Any) -> None:
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a mapping")
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"scenario schema error at {where}: {exc.message}") from None


def _merge(defaults: dict, doc: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in doc.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("arrivals",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def expand_seeds(seeds) -> list:
    if isinstance(seeds, dict):
        return [int(seeds["base"]) + i for i in range(int(seeds["count"]))]
    return [int(s) for s in seeds]


def from_document(doc: dict) -> ScenarioConfig:
    validate_document(doc)
    d = _merge(DEFAULTS, doc)
    if "adaptive" in doc.get("jamming", {}):
        d["jamming"]["adaptive"] = copy.deepcopy(doc["jamming"]["adaptive"])
    if "reactive" in doc.get("jamming", {}):
        d["jamming"]["reactive"] = copy.deepcopy(doc["jamming"]["reactive"])
    pol = d["policy"]
    params = PolicyParams(c=float(pol["c"]), w_min=float(pol["w_min"]),
                          success_as_full=bool(pol["success_as_full"]))
    pot = PotentialParams(**{k: float(v) for k, v in d["potential"].items()})
    adversary = AdversarySpec(arrivals=dict(d["arrivals"]),
                              adaptive_jam=dict(d["jamming"]["adaptive"]),
                              reactive_jam=dict(d["jamming"]["reactive"]),
                              seed_offset=int(d["jamming"]["seed_offset"]))
    base = EngineConfig(policy=pol["kind"], params=params, aloha_p=float(pol["p"]),
                        adversary=adversary, potential=pot, horizon=int(d["horizon"]),
                        master_seed=0, trace_level=TraceLevel(d["trace_level"]),
                        checkpoint_stride=int(d["checkpoint_stride"]))
    try:
        base.validate()
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None
    return ScenarioConfig(name=d["name"], raw=d, seeds=expand_seeds(d["seeds"]),
                          checkpoint_stride=base.checkpoint_stride, trace_level=base.trace_level,
                          outputs=tuple(d["outputs"]), strict=bool(d["strict"]),
                          horizon=base.horizon, base=base)


def load_document(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse scenario {path}: {exc}") from None
    return doc


def apply_overrides(doc: dict, overrides: list) -> dict:
    """Apply ``key.path=value`` overrides; values are parsed as YAML scalars."""
    doc = copy.deepcopy(doc)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, text = item.partition("=")
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigError(f"empty override key in {item!r}")
        value = yaml.safe_load(text)
        node = doc
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = value
    return doc


def get_path(doc: dict, key: str) -> Optional[Any]:
    node: Any = doc
    for p in key.split("."):
        if not isinstance(node, dict) or p not in node:
            return None
        node = node[p]
    return node


def load_scenario(path, overrides: Optional[list] = None) -> ScenarioConfig:
    return from_document(apply_overrides(load_document(path), overrides or []))


def scenario_to_document(sc: ScenarioConfig) -> dict:
    return copy.deepcopy(sc.raw)


def write_scenario(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
