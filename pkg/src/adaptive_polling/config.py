"""JSON scenario files.

Layout::

    {
      "queues": [
        {"interarrival": {"dist": "uniform", "mean": 4}, "service": {...}, "limit": 4, "saturated": false},
        ...  (exactly three entries)
      ],
      "switchover": {"s12": {...}, "s23": {...}, "s31": {...}, "s13": {...}},
      "discipline": "limited",
      "run": {"cycles": 10000000, "warmup": 100000, "seed": 1, "replications": 1}
    }

``interarrival`` may be ``null`` for a saturated queue.  ``limit`` defaults to 1,
``saturated`` to false and every ``run`` key is optional.  Unknown keys anywhere
are errors.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from . import distributions as dist
from .errors import InvalidSpec, ParseError, ValidationError
from .model import LEG_NAMES, Discipline, ModelParams, validate

DEFAULT_CYCLES = 10_000_000

_TOP_KEYS = {"queues", "switchover", "discipline", "run"}
_QUEUE_KEYS = {"interarrival", "service", "limit", "saturated"}
_RUN_KEYS = {"cycles", "warmup", "seed", "replications", "out", "emit_trace"}


@dataclass(frozen=True)
class RunSpec:
    cycles: int = DEFAULT_CYCLES
    warmup_cycles: int = DEFAULT_CYCLES // 100
    seed: int = 0
    replications: int = 1
    out: Optional[str] = None
    emit_trace: bool = False

    def __post_init__(self):
        if not (self.cycles > self.warmup_cycles >= 0):
            raise ValidationError([f"run: need cycles > warmup >= 0, got {self.cycles}, {self.warmup_cycles}"])
        if self.replications < 1:
            raise ValidationError([f"run: replications must be >= 1, got {self.replications}"])


@dataclass(frozen=True)
class LoadedConfig:
    params: ModelParams
    run: RunSpec
    warnings: tuple
    raw: dict


def _int(v, field):
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            return int(v)
        raise ParseError(f"expected an integer, got {v!r}", field=field)
    return v


def _unknown(d, allowed, where):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ParseError(f"unknown keys {extra}; allowed {sorted(allowed)}", field=where)


def _law(v, field):
    try:
        return dist.spec_from_dict(v)
    except InvalidSpec as exc:
        raise ValidationError([f"{field}: {exc}"]) from None


def from_dict(doc: dict) -> LoadedConfig:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    _unknown(doc, _TOP_KEYS, "<top>")
    for key in ("queues", "switchover", "discipline"):
        if key not in doc:
            raise ParseError("missing required key", field=key)

    queues = doc["queues"]
    if not isinstance(queues, list) or len(queues) != 3:
        raise ParseError("expected a list of exactly 3 queue objects", field="queues")
    inter, svc, limits, sat = [], [], [], []
    for i, q in enumerate(queues):
        where = f"queues[{i}]"
        if not isinstance(q, dict):
            raise ParseError("expected an object", field=where)
        _unknown(q, _QUEUE_KEYS, where)
        if "service" not in q:
            raise ParseError("missing required key", field=f"{where}.service")
        s = q.get("saturated", False)
        if not isinstance(s, bool):
            raise ParseError(f"expected true or false, got {s!r}", field=f"{where}.saturated")
        ia = q.get("interarrival")
        if ia is None and not s:
            raise ParseError("required unless the queue is saturated", field=f"{where}.interarrival")
        inter.append(None if ia is None else _law(ia, f"{where}.interarrival"))
        svc.append(_law(q["service"], f"{where}.service"))
        limits.append(_int(q.get("limit", 1), f"{where}.limit"))
        sat.append(s)

    sw = doc["switchover"]
    if not isinstance(sw, dict):
        raise ParseError("expected an object", field="switchover")
    _unknown(sw, set(LEG_NAMES), "switchover")
    missing = [n for n in LEG_NAMES if n not in sw]
    if missing:
        raise ParseError(f"missing legs {missing}", field="switchover")
    legs = [_law(sw[n], f"switchover.{n}") for n in LEG_NAMES]

    try:
        disc = Discipline(doc["discipline"])
    except ValueError:
        raise ParseError(
            f"unknown discipline {doc['discipline']!r}; expected one of {[d.value for d in Discipline]}",
            field="discipline",
        ) from None

    params = ModelParams(tuple(inter), tuple(svc), tuple(legs), disc, tuple(limits), tuple(sat))
    problems = validate(params)
    errors = [p for p in problems if not p.startswith("warning:")]
    if errors:
        raise ValidationError(errors)

    run = doc.get("run", {})
    if not isinstance(run, dict):
        raise ParseError("expected an object", field="run")
    _unknown(run, _RUN_KEYS, "run")
    cycles = _int(run.get("cycles", DEFAULT_CYCLES), "run.cycles")
    spec = RunSpec(
        cycles=cycles,
        warmup_cycles=_int(run.get("warmup", cycles // 100), "run.warmup"),
        seed=_int(run.get("seed", 0), "run.seed"),
        replications=_int(run.get("replications", 1), "run.replications"),
        out=run.get("out"),
        emit_trace=bool(run.get("emit_trace", False)),
    )
    warnings = tuple(p[len("warning: "):] for p in problems if p.startswith("warning:"))
    return LoadedConfig(params, spec, warnings, copy.deepcopy(doc))


def loads(text: str) -> LoadedConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return from_dict(doc)


def load_config(path) -> LoadedConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def bundled_names() -> list:
    files = resources.files(__package__).joinpath("configs")
    return sorted(os.path.splitext(f.name)[0] for f in files.iterdir() if f.name.endswith(".json"))


def bundled_text(name: str) -> str:
    return resources.files(__package__).joinpath("configs", f"{name}.json").read_text(encoding="utf-8")


def load_bundled(name: str) -> LoadedConfig:
    return loads(bundled_text(name))


def to_dict(params: ModelParams, run: Optional[RunSpec] = None) -> dict:
    doc = {
        "queues": [
            {
                "interarrival": None if params.interarrival[k] is None else dist.spec_to_dict(params.interarrival[k]),
                "service": dist.spec_to_dict(params.service[k]),
                "limit": params.limits[k],
                "saturated": params.saturated[k],
            }
            for k in range(3)
        ],
        "switchover": {n: dist.spec_to_dict(s) for n, s in zip(LEG_NAMES, params.switchover)},
        "discipline": params.discipline.value,
    }
    if run is not None:
        doc["run"] = {
            "cycles": run.cycles,
            "warmup": run.warmup_cycles,
            "seed": run.seed,
            "replications": run.replications,
        }
    return doc
