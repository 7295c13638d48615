"""Discrete-event simulation of the adaptive three-queue polling system.

Each primitive sequence (3 interarrival, 3 service, 4 switch-over) draws from its
own numpy ``Generator`` spawned from one master ``SeedSequence``.  Variates are
produced in blocks by inverse transform and consumed by the compiled loop in
:mod:`._kernel`; a stream's sequence does not depend on the block size.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import _kernel as K
from .distributions import Sampler
from .errors import DuplicateSeeds, InvalidParams, InvariantViolation, NonFiniteSample
from .model import CycleType, Discipline, ModelParams, validate

N_BATCHES = 30
DEFAULT_BLOCK = 1 << 15

_DISC_CODE = {
    Discipline.LIMITED: K.LIMITED,
    Discipline.LIMITED_GATED: K.LIMITED_GATED,
    Discipline.GATED: K.GATED, Discipline.EXHAUSTIVE: K.EXHAUSTIVE}
_PHASES = {K.DECIDE: "decide", K.SERVING: "serving", K.WALKING: "walking"}
_EVENT_KINDS = {K.EV_ARRIVAL: "arrival", K.EV_SERVICE: "service", K.EV_WALK: "walk"}
_INVARIANT_NAMES = {
    K.ERR_WALK_BALANCE: "|E1 + E4 - E3| <= 1",
    K.ERR_LEG2_BALANCE: "E2 <= E1 <= E2 + 1",
    K.ERR_SANDWICH: "(E1-E4)-1 <= served standard cycles <= D2 <= l2*((E1-E4)+1)",
    K.ERR_SATURATED_VISIT: "exactly l1 services per visit to saturated queue 1",
    K.ERR_NEGATIVE_Q: "Q >= 0",
}


@dataclass(frozen=True)
class SimState:
    """Snapshot of the Markov state; residual times are relative to ``clock``."""

    Q: tuple
    A: tuple
    B: float
    B0: float
    H: int
    I: int
    C: int
    clock: float
    cycle_type: CycleType
    phase: str
    cycle_index: int


@dataclass(frozen=True)
class CumulativeRecord:
    T: tuple
    U: tuple
    D: tuple
    E: tuple
    F: tuple
    cycles_total: int
    cycles_reduced: int
    standard_q2_served: int  # standard cycles with at least one queue-2 completion
    elapsed: float
    queue_area: tuple
    events: int

    def __sub__(self, other: "CumulativeRecord") -> "CumulativeRecord":
        def d(a, b):
            return tuple(x - y for x, y in zip(a, b))

        return CumulativeRecord(
            T=d(self.T, other.T),
            U=d(self.U, other.U),
            D=d(self.D, other.D),
            E=d(self.E, other.E),
            F=d(self.F, other.F),
            cycles_total=self.cycles_total - other.cycles_total,
            cycles_reduced=self.cycles_reduced - other.cycles_reduced,
            standard_q2_served=self.standard_q2_served - other.standard_q2_served,
            elapsed=self.elapsed - other.elapsed,
            queue_area=d(self.queue_area, other.queue_area),
            events=self.events - other.events,
        )


@dataclass(frozen=True)
class Estimates:
    """Steady-state estimates from one run.

    ``u4`` is the fraction of time spent walking 1->3.  ``r4`` is the number of
    completed 1->3 walks per unit time; in the limit ``r4 == u4 / E[s13]``.
    """

    p: float
    u4: float
    f: tuple
    mean_queue: tuple  # nan for saturated queues
    p_halfwidth: float = math.nan
    u4_halfwidth: float = math.nan
    r4: float = math.nan
    r4_halfwidth: float = math.nan
    cycles: int = 0
    elapsed: float = 0.0
    final_queue: tuple = ()
    max_total_queue: int = 0


@dataclass(frozen=True)
class PooledEstimates:
    replications: tuple  # Estimates per seed, in the given seed order
    seeds: tuple
    p: float
    u4: float
    p_stderr: float
    u4_stderr: float
    r4: float = math.nan
    r4_stderr: float = math.nan


def _open_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    # strictly inside (0, 1): (k + 1/2) / 2**53
    return (rng.integers(0, 1 << 53, size=n, dtype=np.int64) + 0.5) * (1.0 / (1 << 53))


class Simulator:
    """One independent simulation engine (not thread-safe; use one per thread)."""

    def __init__(
        self,
        params: ModelParams,
        seed: int,
        block_size: int = DEFAULT_BLOCK,
        check: bool = False,
        initial_queue=(0, 0, 0),
    ):
        problems = [p for p in validate(params) if not p.startswith("warning:")]
        if problems:
            raise InvalidParams(problems)
        self.params = params
        self.seed = seed
        self.check = check
        sat = params.saturated
        samplers = [None if sat[k] else Sampler(params.interarrival[k]) for k in range(3)]
        samplers += [Sampler(s) for s in params.service]
        samplers += [Sampler(s) for s in params.switchover]
        self._samplers = samplers
        children = np.random.SeedSequence(seed).spawn(K.N_STREAMS)
        self._rngs = [np.random.default_rng(c) for c in children]

        self._buf = np.zeros((K.N_STREAMS, block_size))
        self._pos = np.zeros(K.N_STREAMS, dtype=np.int64)
        for s in range(K.N_STREAMS):
            self._refill(s)
        self._sat = np.array(sat, dtype=np.bool_)
        self._limits = np.array(params.limits, dtype=np.int64)
        self._disc = _DISC_CODE[params.discipline]

        self._si = np.zeros(K.N_STATE_I, dtype=np.int64)
        self._sf = np.zeros(K.N_STATE_F)
        self.reset_record()
        for k in range(3):
            n = initial_queue[k]
            if not sat[k]:
                if isinstance(n, bool) or int(n) != n or n < 0:
                    raise InvalidParams([f"initial queue {k + 1} must be a nonnegative integer, got {n!r}"])
                self._si[K.Q0 + k] = int(n)
        self._si[K.H] = 1
        self._si[K.PHASE] = K.DECIDE
        self._si[K.PEND] = K.VISIT_START
        self._si[K.CTYPE] = K.STANDARD
        self._sf[K.SERVER_T] = math.inf
        for k in range(3):
            if sat[k]:
                self._sf[K.NEXT_ARR0 + k] = math.inf
            else:
                self._sf[K.NEXT_ARR0 + k] = self._buf[k, 0]
                self._pos[k] = 1

    def _refill(self, s: int) -> None:
        sampler = self._samplers[s]
        n = self._buf.shape[1]
        if sampler is None:
            self._buf[s] = math.inf
        else:
            x = sampler.sample(_open_uniforms(self._rngs[s], n))
            if not np.all(np.isfinite(x)) or np.any(x < 0):
                raise NonFiniteSample(f"stream {s} produced a non-finite or negative variate")
            self._buf[s] = x
        self._pos[s] = 0

    def reset_record(self) -> None:
        self._ri = np.zeros(K.N_REC_I, dtype=np.int64)
        self._rf = np.zeros(K.N_REC_F)

    def _advance(self, target_cycles: int, max_events: int) -> int:
        code = K.advance(
            self._si, self._sf, self._ri, self._rf, self._buf, self._pos,
            self._sat, self._limits, self._disc, target_cycles, max_events, self.check,
        )
        if code >= 0:
            self._refill(code)
        elif code == K.RET_INVARIANT:
            raise InvariantViolation(
                f"{_INVARIANT_NAMES.get(int(self._si[K.ERR]), 'unknown')} violated at t={self._sf[K.CLOCK]:.6g}"
            )
        return code

    def step(self) -> None:
        """Process exactly one scheduled event (plus any instantaneous decisions before it)."""
        before = int(self._ri[K.EVENTS])
        while int(self._ri[K.EVENTS]) == before:
            self._advance(np.iinfo(np.int64).max, 1)

    def run_cycles(self, n: int) -> None:
        """Advance until ``n`` more cycles have completed in the current record."""
        target = int(self._ri[K.CYC_TOTAL]) + n
        while int(self._ri[K.CYC_TOTAL]) < target:
            self._advance(target, np.iinfo(np.int64).max)

    def run_events(self, n: int) -> None:
        target = int(self._ri[K.EVENTS]) + n
        while int(self._ri[K.EVENTS]) < target:
            self._advance(np.iinfo(np.int64).max, target - int(self._ri[K.EVENTS]))

    @property
    def state(self) -> SimState:
        si, sf = self._si, self._sf
        clock = float(sf[K.CLOCK])
        sat = self.params.saturated
        phase = int(si[K.PHASE])
        return SimState(
            Q=tuple(math.inf if sat[k] else int(si[K.Q0 + k]) for k in range(3)),
            A=tuple(math.inf if sat[k] else float(sf[K.NEXT_ARR0 + k]) - clock for k in range(3)),
            B=float(sf[K.SERVER_T]) - clock if phase == K.SERVING else 0.0,
            B0=float(sf[K.SERVER_T]) - clock if phase == K.WALKING else 0.0,
            H=int(si[K.H]),
            I=int(si[K.I_LATCH]),
            C=int(si[K.C]),
            clock=clock,
            cycle_type=CycleType.REDUCED if si[K.CTYPE] == K.REDUCED else CycleType.STANDARD,
            phase=_PHASES[phase],
            cycle_index=int(si[K.CYCLE]),
        )

    @property
    def record(self) -> CumulativeRecord:
        ri, rf = self._ri, self._rf
        return CumulativeRecord(
            T=tuple(float(x) for x in rf[K.T0:K.T0 + 3]),
            U=tuple(float(x) for x in rf[K.U0:K.U0 + 4]),
            D=tuple(int(x) for x in ri[K.D0:K.D0 + 3]),
            E=tuple(int(x) for x in ri[K.E0:K.E0 + 4]),
            F=tuple(int(x) for x in ri[K.F0:K.F0 + 3]),
            cycles_total=int(ri[K.CYC_TOTAL]),
            cycles_reduced=int(ri[K.CYC_REDUCED]),
            standard_q2_served=int(ri[K.STD_Q2_SERVED]),
            elapsed=float(rf[K.ELAPSED]),
            queue_area=tuple(float(x) for x in rf[K.QAREA0:K.QAREA0 + 3]),
            events=int(ri[K.EVENTS]),
        )

    @property
    def last_event(self) -> tuple:
        return _EVENT_KINDS.get(int(self._si[K.LAST_KIND]), ""), int(self._si[K.LAST_ST])

    @property
    def max_total_queue(self) -> int:
        return int(self._si[K.QMAX])


def init(params: ModelParams, seed: int, **kwargs) -> Simulator:
    return Simulator(params, seed, **kwargs)


def step(sim: Simulator) -> tuple:
    sim.step()
    return sim.state, sim.record


def estimates_from_record(rec: CumulativeRecord, saturated=(False, False, False), batches=None, sim=None) -> Estimates:
    el = rec.elapsed
    p = rec.cycles_reduced / rec.cycles_total if rec.cycles_total else math.nan
    u4 = rec.U[3] / el if el > 0 else math.nan
    r4 = rec.E[3] / el if el > 0 else math.nan
    p_hw = u4_hw = r4_hw = math.nan
    if batches:
        tq = stats.t.ppf(0.975, len(batches) - 1)

        def hw(xs):
            return float(tq * np.std(xs, ddof=1) / math.sqrt(len(xs)))

        p_hw = hw([b.cycles_reduced / b.cycles_total for b in batches])
        u4_hw = hw([b.U[3] / b.elapsed for b in batches])
        r4_hw = hw([b.E[3] / b.elapsed for b in batches])
    return Estimates(
        p=p,
        u4=u4,
        f=tuple(x / el if el > 0 else math.nan for x in rec.F),
        mean_queue=tuple(math.nan if saturated[k] else rec.queue_area[k] / el for k in range(3)),
        p_halfwidth=p_hw,
        u4_halfwidth=u4_hw,
        r4=r4,
        r4_halfwidth=r4_hw,
        cycles=rec.cycles_total,
        elapsed=el,
        final_queue=sim.state.Q if sim is not None else (),
        max_total_queue=sim.max_total_queue if sim is not None else 0,
    )


def run(
    params: ModelParams,
    cycles: int,
    warmup_cycles: Optional[int] = None,
    seed: int = 0,
    check: bool = False,
    n_batches: int = N_BATCHES,
) -> tuple:
    """Simulate ``cycles`` cycles in total; the first ``warmup_cycles`` are discarded.

    Returns ``(Estimates, CumulativeRecord)`` for the measured part.  Warmup defaults
    to 1% of ``cycles``.
    """
    if warmup_cycles is None:
        warmup_cycles = cycles // 100
    if not (cycles > warmup_cycles >= 0):
        raise InvalidParams([f"need cycles > warmup_cycles >= 0, got {cycles}, {warmup_cycles}"])
    sim = Simulator(params, seed, check=check)
    if warmup_cycles:
        sim.run_cycles(warmup_cycles)
    sim.reset_record()
    measured = cycles - warmup_cycles
    nb = n_batches if measured >= n_batches else 0
    batches = []
    prev = sim.record
    if nb:
        bounds = [round(i * measured / nb) for i in range(1, nb + 1)]
        done = 0
        for b in bounds:
            sim.run_cycles(b - done)
            done = b
            cur = sim.record
            batches.append(cur - prev)
            prev = cur
    else:
        sim.run_cycles(measured)
    rec = sim.record
    return estimates_from_record(rec, params.saturated, batches, sim), rec


def _mean_se(xs):
    n = len(xs)
    m = math.fsum(xs) / n
    se = math.sqrt(math.fsum((x - m) ** 2 for x in xs) / (n - 1) / n) if n > 1 else math.nan
    return m, se


def _pooled(seeds, results) -> PooledEstimates:
    p, p_se = _mean_se([r.p for r in results])
    u, u_se = _mean_se([r.u4 for r in results])
    r, r_se = _mean_se([r.r4 for r in results])
    return PooledEstimates(tuple(results), tuple(seeds), p, u, p_se, u_se, r, r_se)


def run_replications(
    params: ModelParams,
    cycles: int,
    warmup_cycles: Optional[int],
    seeds: Sequence[int],
    max_workers: int = 1,
) -> PooledEstimates:
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise DuplicateSeeds(f"replication seeds must be distinct, got {seeds}")
    if not seeds:
        raise ValueError("at least one seed is required")

    def one(s):
        return run(params, cycles, warmup_cycles, s)[0]

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as ex:
            results = list(ex.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    return _pooled(seeds, results)


TRACE_COLUMNS = ("event_time", "event_kind", "station", "Q1", "Q2", "Q3", "cycle_index", "cycle_type")


def write_trace(params: ModelParams, seed: int, n_events: int, path) -> None:
    """Append-only CSV of the first ``n_events`` scheduled events (debugging aid)."""
    sim = Simulator(params, seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for _ in range(n_events):
            sim.step()
            st = sim.state
            kind, station = sim.last_event
            q = ["inf" if math.isinf(x) else x for x in st.Q]
            w.writerow([f"{st.clock:.6g}", kind, station, *q, st.cycle_index, st.cycle_type.value])
