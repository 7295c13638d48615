"""Reference scenarios, reproduction runs and parameter sweeps.

Reference ``u4`` figures are compared with the estimator ``r4`` (1->3 walks
completed per unit time, i.e. the time fraction divided by the mean 1->3
walking time).  The published numbers for every scenario satisfy the
work-conservation identity only under that reading; see the README.
"""
from __future__ import annotations

import copy
import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from scipy import stats

from . import config as cfg
from .errors import BadAxis, ConfigError, UnknownScenario
from .simulation import Estimates, run, run_replications
from .stability import check, verdict_record


@dataclass(frozen=True)
class ReferenceValue:
    scenario: str
    quantity: str  # "p" or "u4"
    value: float
    source: str
    tolerance: float
    row: Optional[float] = None  # sweep coordinate (Weibull shape) for table rows

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.quantity not in ("p", "u4"):
            raise ValueError(f"unknown quantity {self.quantity!r}")

    @property
    def estimator(self) -> str:
        return "p" if self.quantity == "p" else "r4"


P_TOL, U4_TOL, TABLE_P_TOL = 0.004, 0.002, 0.005

_EXAMPLES = {
    "example1": (0.1825, 0.0466),
    "example2": (0.2027, 0.0518),
    "example3": (0.2410, 0.0619),
    "example4": (0.1751, 0.0446),
    "example5": (0.2494, 0.0641),
}

# Weibull shape a -> (p, u4)
TABLE1 = {
    0.18: (0.4181, 0.1097), 0.19: (0.4174, 0.1095), 0.20: (0.4162, 0.1091), 0.25: (0.4089, 0.1071),
    0.30: (0.3982, 0.1041), 0.35: (0.3849, 0.1005), 0.40: (0.3713, 0.0969), 0.45: (0.3571, 0.0929),
    0.50: (0.3435, 0.0892), 0.55: (0.3297, 0.0855), 0.6: (0.3179, 0.0825), 0.7: (0.2953, 0.0763),
    0.8: (0.2762, 0.0712), 0.9: (0.2602, 0.0670), 1: (0.2461, 0.0632), 1.25: (0.2198, 0.0563),
    1.5: (0.2009, 0.0514), 2: (0.1765, 0.0450), 2.5: (0.1623, 0.0413), 3: (0.1527, 0.0388),
    4: (0.1417, 0.0360), 5: (0.1361, 0.0346), 10: (0.1272, 0.0322), 20: (0.1245, 0.0315),
}
TABLE1_SPOT = (0.18, 0.5, 1, 2, 10)
FIG1_LIMIT = 0.1237


def _example_refs(name):
    p, u4 = _EXAMPLES[name]
    n = name[len("example"):]
    return (
        ReferenceValue(name, "p", p, f"published example {n}, p", P_TOL),
        ReferenceValue(name, "u4", u4, f"published example {n}, u4", U4_TOL),
    )


def table1_refs(shapes: Optional[Sequence[float]] = None) -> tuple:
    out = []
    for a in shapes if shapes is not None else TABLE1:
        if a not in TABLE1:
            raise UnknownScenario(f"no reference row for Weibull shape {a}")
        p, u4 = TABLE1[a]
        out.append(ReferenceValue("table1", "p", p, f"published Weibull table, a={a:g}, p", TABLE_P_TOL, a))
        out.append(ReferenceValue("table1", "u4", u4, f"published Weibull table, a={a:g}, u4", U4_TOL, a))
    return tuple(out)


@dataclass(frozen=True)
class Scenario:
    name: str
    config: str  # bundled config name
    refs: tuple
    description: str


SCENARIOS = {
    **{n: Scenario(n, n, _example_refs(n), f"saturated queue 1, l=(1,4,2), {d}") for n, d in [
        ("example1", "uniform queue-2 interarrivals"),
        ("example2", "Pareto xmin=2 shape=2 queue-2 interarrivals"),
        ("example3", "exponential queue-2 interarrivals"),
        ("example4", "Pareto matching two exponential moments"),
        ("example5", "two-point law matching three exponential moments"),
    ]},
    "table1": Scenario("table1", "table1", table1_refs(), "saturated queue 1, l=(1,6,4), Weibull queue-2 interarrivals"),
    "fig1_limit": Scenario(
        "fig1_limit", "fig1_limit",
        (ReferenceValue("fig1_limit", "p", FIG1_LIMIT, "published limiting value for constant interarrivals, p", P_TOL),),
        "saturated queue 1, l=(1,6,4), constant queue-2 interarrivals 4",
    ),
}


@dataclass(frozen=True)
class Comparison:
    ref: ReferenceValue
    estimate: float
    halfwidth: float

    @property
    def error(self) -> float:
        return self.estimate - self.ref.value

    @property
    def passed(self) -> bool:
        return abs(self.error) <= self.ref.tolerance

    def line(self) -> str:
        row = f" a={self.ref.row:g}" if self.ref.row is not None else ""
        status = "PASS" if self.passed else "FAIL"
        q = self.ref.quantity
        if self.ref.estimator != q:
            q = f"{q} (via {self.ref.estimator})"
        return (
            f"{status} {self.ref.scenario}{row} {q}: estimate {self.estimate:.4f} "
            f"+- {self.halfwidth:.4f}, reference {self.ref.value:.4f} +- {self.ref.tolerance:g} [{self.ref.source}]"
        )


@dataclass(frozen=True)
class ReproReport:
    scenario: str
    comparisons: tuple
    estimates: tuple = field(default=(), repr=False)  # (row, Estimates) pairs

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons)

    def text(self) -> str:
        return "\n".join(c.line() for c in self.comparisons)


def set_path(doc: dict, axis: str, value: float) -> dict:
    """Copy of ``doc`` with the numeric field at ``axis`` replaced.

    ``axis`` is a dotted path with 0-based list indices, e.g.
    ``queues.1.interarrival.shape``, or ``lambda1``..``lambda3`` which set the
    arrival rate through the interarrival mean.
    """
    doc = copy.deepcopy(doc)
    if axis in ("lambda1", "lambda2", "lambda3"):
        k = int(axis[-1]) - 1
        law = doc["queues"][k].get("interarrival")
        if not isinstance(law, dict) or "mean" not in law:
            raise BadAxis(f"{axis} needs queue {k + 1} to have an interarrival law with a 'mean' field")
        if not value > 0:
            raise BadAxis(f"{axis} must be positive, got {value}")
        law["mean"] = 1.0 / value
        return doc
    parts = axis.split(".")
    node = doc
    try:
        for p in parts[:-1]:
            node = node[int(p)] if isinstance(node, list) else node[p]
        last = parts[-1]
        key = int(last) if isinstance(node, list) else last
        old = node[key]
    except (KeyError, IndexError, ValueError, TypeError):
        raise BadAxis(f"axis {axis!r} does not name a field of the config") from None
    if isinstance(old, bool) or not isinstance(old, (int, float)):
        raise BadAxis(f"axis {axis!r} is not numeric (found {old!r})")
    node[key] = int(value) if isinstance(old, int) and float(value).is_integer() else value
    return doc


def _estimate(loaded: cfg.LoadedConfig, cycles=None, warmup=None, seed=None) -> tuple:
    """``(Estimates-like object, halfwidth lookup)`` honouring the run spec."""
    rs = loaded.run
    cycles = rs.cycles if cycles is None else cycles
    if warmup is None:
        warmup = rs.warmup_cycles if cycles == rs.cycles else cycles // 100
    seed = rs.seed if seed is None else seed
    if rs.replications == 1:
        est, _ = run(loaded.params, cycles, warmup, seed)
        return est, {"p": est.p_halfwidth, "u4": est.u4_halfwidth, "r4": est.r4_halfwidth}
    pooled = run_replications(loaded.params, cycles, warmup, [seed + i for i in range(rs.replications)])
    tq = stats.t.ppf(0.975, rs.replications - 1)
    est = Estimates(p=pooled.p, u4=pooled.u4, f=(), mean_queue=(), r4=pooled.r4, cycles=cycles - warmup)
    return est, {"p": tq * pooled.p_stderr, "u4": tq * pooled.u4_stderr, "r4": tq * pooled.r4_stderr}


def _map(fn: Callable, items: list, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def repro(
    scenario: str,
    cycles: Optional[int] = None,
    seed: Optional[int] = None,
    rows: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> ReproReport:
    """Run a reference scenario and compare the estimates with the published values.

    ``rows`` restricts ``table1`` to a subset of Weibull shapes.
    """
    if scenario not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    sc = SCENARIOS[scenario]
    base = cfg.load_bundled(sc.config)
    refs = sc.refs if rows is None or scenario != "table1" else table1_refs(rows)
    shapes = list(dict.fromkeys(r.row for r in refs))

    def one(a):
        loaded = base if a is None else cfg.from_dict(set_path(base.raw, "queues.1.interarrival.shape", a))
        return _estimate(loaded, cycles=cycles, seed=seed)

    results = dict(zip(shapes, _map(one, shapes, workers)))
    comps = []
    for r in refs:
        est, hw = results[r.row]
        comps.append(Comparison(r, getattr(est, r.estimator), hw[r.estimator]))
    return ReproReport(scenario, tuple(comps), tuple((a, results[a][0]) for a in shapes))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


SIMULATE_COLUMNS = ("p", "p_halfwidth", "u4", "u4_halfwidth", "r4", "r4_halfwidth", "cycles")


def sweep(
    base: cfg.LoadedConfig,
    axis: str,
    values: Sequence[float],
    mode: str = "simulate",
    cycles: Optional[int] = None,
    workers: int = 1,
) -> str:
    """CSV text with one row per axis value.

    Every row uses the master seed of ``base`` so rows share random numbers.
    """
    if mode not in ("simulate", "stability"):
        raise ValueError(f"mode must be 'simulate' or 'stability', got {mode!r}")
    configs = []
    for v in values:
        try:
            configs.append(cfg.from_dict(set_path(base.raw, axis, v)))
        except ConfigError as exc:
            raise BadAxis(f"{axis}={v}: {exc}") from None

    if mode == "stability":
        def row(c):
            return verdict_record(check(c.params))
    else:
        def row(c):
            est, hw = _estimate(c, cycles=cycles)
            return {
                "p": est.p, "p_halfwidth": hw["p"], "u4": est.u4, "u4_halfwidth": hw["u4"],
                "r4": est.r4, "r4_halfwidth": hw["r4"], "cycles": est.cycles,
            }

    rows = _map(row, configs, workers)
    if rows:
        header = [axis, *rows[0].keys()]
    elif mode == "simulate":
        header = [axis, *SIMULATE_COLUMNS]
    else:
        header = [axis, "verdict"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for v, r in zip(values, rows):
        w.writerow([_fmt(float(v)), *(_fmt(x) for x in r.values())])
    return buf.getvalue()
