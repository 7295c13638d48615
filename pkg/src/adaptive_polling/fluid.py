"""Fluid model: region rates, trajectories and drift bounds.

Rates are solved in throughput form.  ``d[k]`` is the fluid departure rate of
queue k and ``e[j]`` the completion rate of walks on leg j, so that
``T'[k] = Es[k] * d[k]`` and ``U'[j] = Ex[j] * e[j]``.  Zero service or walking
means then need no special treatment.

With ``s = e1 + e4 = e3`` and ``R = 1 - sum(beta[k], k not in J)`` the limited
equations reduce to

    s * (zeta + W) - e4 * (zeta - zeta*) = R,    W = sum(l[j] * Es[j], j in J)

together with ``e1 = e2 = s - e4``, ``d[j] = l[j] * s`` on the active set and the
sandwich ``d2 / l2 <= e1 - e4 <= d2``.  If queue 2 is positive, ``e4 = 0``.
If it is empty and ``l2 == 1`` the sandwich pins ``e1 - e4 = lambda2``.
Otherwise ``e4`` ranges over an interval and every rate is monotone in it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

from .errors import InfeasibleRegion, NotApplicable
from .model import DerivedQuantities, Discipline
from .stability import Verdict, check_limited

TOL = 1e-12


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 1e-12) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Interval) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: float) -> "Interval":
        a, b = self.lo * c, self.hi * c
        return Interval(min(a, b), max(a, b))


@dataclass(frozen=True)
class FluidState:
    """Fluid levels; ``inf`` marks a saturated queue, which is always active."""

    Q: tuple

    def __post_init__(self):
        q = tuple(float(x) for x in self.Q)
        if len(q) != 3 or any(not (x >= 0) for x in q):
            raise ValueError(f"fluid levels must be three nonnegative numbers, got {self.Q!r}")
        object.__setattr__(self, "Q", q)

    @property
    def J(self) -> frozenset:
        return frozenset(k + 1 for k in range(3) if self.Q[k] > 0)

    @property
    def q2_positive(self) -> bool:
        return self.Q[1] > 0


@dataclass(frozen=True)
class RateSolution:
    J: frozenset  # active queues the rates were solved for (1-based)
    q2_positive: bool
    T: tuple  # Interval per queue
    U: tuple  # Interval per leg
    Qdot: tuple  # Interval per queue; nan for saturated queues
    d: tuple  # departure rates, Interval per queue
    e: tuple  # walk completion rates, Interval per leg
    violations: tuple = ()  # names of violated coupling inequalities

    @property
    def tight(self) -> bool:
        return all(x.exact for x in self.T + self.U)

    @property
    def feasible(self) -> bool:
        return not self.violations


def _limits_ok(l):
    if len(l) != 3 or any(int(x) != x or x < 1 for x in l):
        raise ValueError(f"limits must be three integers >= 1, got {l!r}")


def _saturated(derived, k):
    return bool(derived.saturated[k]) if derived.saturated else False


def _solution(derived, l, J, q2pos, s_of, e4_range):
    """Assemble a RateSolution from ``e4 -> s`` over ``e4_range``."""
    lam, es, ex = derived.lam, derived.mean_service, derived.mean_switchover
    lo4, hi4 = e4_range
    pts = []
    for e4 in (lo4, hi4):
        s = s_of(e4)
        e = (s - e4, s - e4, s, e4)
        d = tuple(l[k] * s if (k + 1) in J else lam[k] for k in range(3))
        pts.append((d, e))

    def iv(a, b):
        return Interval(min(a, b), max(a, b))

    d = tuple(iv(pts[0][0][k], pts[1][0][k]) for k in range(3))
    e = tuple(iv(pts[0][1][j], pts[1][1][j]) for j in range(4))
    T = tuple(d[k].scale(es[k]) for k in range(3))
    U = tuple(e[j].scale(ex[j]) for j in range(4))
    Qdot = tuple(
        Interval(math.nan, math.nan) if _saturated(derived, k) else lam[k] - d[k] for k in range(3)
    )

    v = []
    # every point of the family must satisfy the couplings; they are linear in e4,
    # so checking both ends suffices
    for dd, ee in pts:
        if ee[0] + ee[3] < dd[0] / l[0] - TOL:
            v.append("walk-service coupling at queue 1")
        if ee[1] < dd[1] / l[1] - TOL:
            v.append("walk-service coupling at queue 2")
        if ee[2] < dd[2] / l[2] - TOL:
            v.append("walk-service coupling at queue 3")
        diff = ee[0] - ee[3]
        if diff < dd[1] / l[1] - TOL or diff > dd[1] + TOL:
            v.append("queue-2 dispatch sandwich")
        if min(ee) < -TOL:
            v.append("negative walk rate")
    return RateSolution(J, q2pos, T, U, Qdot, d, e, tuple(dict.fromkeys(v)))


def rates_for(derived: DerivedQuantities, l: Sequence[int], J) -> RateSolution:
    """Limited-discipline rates for a given active set ``J`` (1-based indices).

    Raises :class:`InfeasibleRegion` when no nonnegative rates satisfy the
    equalities for this ``J``; inequalities that fail are listed in ``violations``.
    """
    _limits_ok(l)
    J = frozenset(J)
    lam, es = derived.lam, derived.mean_service
    z, zs = derived.zeta, derived.zeta_star
    R = 1.0 - sum(derived.beta[k] for k in range(3) if (k + 1) not in J)
    W = sum(l[k] * es[k] for k in range(3) if (k + 1) in J)
    if 2 in J:
        s = R / (z + W)
        if s < -TOL:
            raise InfeasibleRegion(f"active set {sorted(J)}: inactive load exceeds 1 (R={R:g})")
        return _solution(derived, l, J, True, lambda e4: s, (0.0, 0.0))

    lam2 = lam[1]
    a, b = z + W, z - zs

    def s_of(e4):
        return (R + e4 * b) / a

    # e1 - e4 = s(e4) - 2 e4 is strictly decreasing in e4 since b < 2a
    def e4_at(diff):
        return (R - diff * a) / (2.0 * a - b)

    if l[1] == 1:
        e4 = e4_at(lam2)
        if e4 < -TOL or s_of(e4) < -TOL:
            raise InfeasibleRegion(
                f"active set {sorted(J)}: queue 2 cannot stay empty (required reduced-walk rate {e4:g} < 0)"
            )
        e4 = max(e4, 0.0)
        return _solution(derived, l, J, False, s_of, (e4, e4))
    lo4 = max(0.0, e4_at(lam2))
    hi4 = e4_at(lam2 / l[1])
    if hi4 < lo4 - TOL:
        raise InfeasibleRegion(
            f"active set {sorted(J)}: no reduced-walk rate meets the queue-2 dispatch sandwich"
        )
    hi4 = max(hi4, lo4)
    return _solution(derived, l, J, False, s_of, (lo4, hi4))


def region_rates(derived: DerivedQuantities, l: Sequence[int], state: FluidState) -> RateSolution:
    """Rates in the region of ``state``; exact except when queue 2 is empty and ``l2 > 1``."""
    return rates_for(derived, l, _active(derived, state))


def _active(derived, state):
    return frozenset(state.J | {k + 1 for k in range(3) if _saturated(derived, k)})


def lower_bound_envelope(derived: DerivedQuantities, l: Sequence[int], J) -> dict:
    """The two lower and one upper closed-form bound on ``T'[j]`` for ``j`` in ``J`` (queue 2 empty)."""
    J = frozenset(J)
    lam, es, beta = derived.lam, derived.mean_service, derived.beta
    z, zs, rho0 = derived.zeta, derived.zeta_star, derived.rho0
    hs, hd = (z + zs) / 2.0, (z - zs) / 2.0
    bJ = sum(beta[k - 1] for k in J)
    wJ = sum(l[k - 1] * es[k - 1] for k in J)
    out = {}
    for j in sorted(J - {2}):
        w = l[j - 1] * es[j - 1]
        out[j] = (
            w * (1 - rho0 + bJ - lam[1] * hd) / (hs + wJ),
            w * (1 - rho0 + bJ) / (z + wJ),
            w * (1 - rho0 + bJ - lam[1] / l[1] * hd) / (hs + wJ),
        )
    return out


def gated_exhaustive_rates(derived: DerivedQuantities, state: FluidState) -> RateSolution:
    """Rates for gated or exhaustive service, where only the total work rate is pinned."""
    lam, es, beta, rho0 = derived.lam, derived.mean_service, derived.beta, derived.rho0
    if any(derived.saturated):
        raise InfeasibleRegion("saturated queues are only modelled under the limited discipline")
    J = state.J
    if not J:
        if rho0 > 1.0 + TOL:
            raise InfeasibleRegion(f"the empty state cannot persist with rho0={rho0:g} > 1")
        T = tuple(Interval.point(b) for b in beta)
        U = tuple(Interval(0.0, max(0.0, 1.0 - rho0)) for _ in range(4))
    else:
        free = 1.0 - sum(beta[k] for k in range(3) if (k + 1) not in J)
        if free < -TOL:
            raise InfeasibleRegion(f"inactive queues alone carry load {1 - free:g} > 1")
        if len(J) == 1:
            T = tuple(Interval.point(free if (k + 1) in J else beta[k]) for k in range(3))
        else:
            T = tuple(Interval(0.0, free) if (k + 1) in J else Interval.point(beta[k]) for k in range(3))
        U = tuple(Interval.point(0.0) for _ in range(4))
    nan = Interval(math.nan, math.nan)
    d, Qdot = [], []
    for k in range(3):
        if (k + 1) not in J:
            d.append(Interval.point(lam[k]))
            Qdot.append(Interval.point(0.0))
        elif es[k] > 0:
            d.append(T[k].scale(1.0 / es[k]))
            Qdot.append(lam[k] - d[-1])
        else:
            d.append(nan)
            Qdot.append(nan)
    return RateSolution(frozenset(J), state.q2_positive, T, U, tuple(Qdot), tuple(d), tuple(nan for _ in range(4)))


@dataclass(frozen=True)
class DriftReport:
    w_prime: Interval  # derivative of W = sum(Q[k] * Es[k]) in the given state
    epsilon: float  # uniform drift bound once queue 2 is empty
    delta: float  # every solution with |Q(0)| <= 1 has W = 0 after delta
    step_deadlines: tuple = ()  # (queue, deadline) pairs of the first draining phase


def _w_prime(derived, sol):
    out = Interval.point(0.0)
    for k in range(3):
        if not _saturated(derived, k):
            out = out + (derived.beta[k] - sol.T[k])
    return out


def lyapunov_drift(
    derived: DerivedQuantities,
    l: Sequence[int],
    state: FluidState,
    discipline: Discipline = Discipline.LIMITED,
) -> DriftReport:
    """Drift of ``W`` at ``state`` together with a uniform bound and drain deadline."""
    es, rho0, lam = derived.mean_service, derived.rho0, derived.lam
    w0 = max(es)
    if not discipline.is_limited:
        if rho0 >= 1.0:
            raise NotApplicable(f"no negative drift with rho0={rho0:g} >= 1")
        sol = gated_exhaustive_rates(derived, state)
        w = Interval.point(rho0 - 1.0) if state.J else Interval.point(0.0)
        eps = 1.0 - rho0
        return DriftReport(w, eps, w0 / eps)

    v = check_limited(derived, l)
    if v.verdict is not Verdict.STABLE:
        raise NotApplicable("the stability inequalities do not all hold")
    # an empty queue that cannot stay empty is switched on, as along a trajectory
    sol = select_rates(derived, l, state)
    z, zs = derived.zeta, derived.zeta_star
    hs, hd = (z + zs) / 2.0, (z - zs) / 2.0
    x = [lam[k] / l[k] for k in range(3)]
    wts = [l[k] * es[k] for k in range(3)]

    # first phase: queues with lam/l <= lam2/l2 drain one after another
    order = sorted((j for j in range(3) if x[j] <= x[1]), key=lambda j: (x[j], j))
    full = z + sum(wts)
    d = 0.0
    deadlines = []
    for j in order:
        eps_k = l[j] * (1.0 - rho0 - x[j] * z) / full
        d = d + (1.0 + lam[j] * d) / eps_k
        deadlines.append((j + 1, d))

    def eps_for(K):
        wK = sum(wts[k] for k in K)
        a = sum(wts[k] * (1.0 - rho0 - x[k] * hs - lam[1] * hd) for k in K) / (hs + wK)
        b = sum(wts[k] * (1.0 - rho0 - x[k] * z) for k in K) / (z + wK)
        return max(a, b)

    families = [(0,), (2,), (0, 2)]
    eps = min(eps_for(K) for K in families)
    if not eps > 0:
        # after the first phase only queues outside it can be active
        rest = [k for k in (0, 2) if k not in order]
        reduced = [K for K in families if set(K) <= set(rest)]
        eps = min((eps_for(K) for K in reduced), default=math.inf)
        if not eps > 0:
            raise NotApplicable("the closed-form lower bounds do not certify a negative drift here")
    delta = d + (w0 + rho0 * d) / eps if math.isfinite(eps) else d
    return DriftReport(_w_prime(derived, sol), eps, delta, tuple(deadlines))


# ---------------------------------------------------------------- trajectories


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    Q_start: tuple
    Qdot: tuple
    region: str
    tight: bool


@dataclass(frozen=True)
class Trajectory:
    segments: tuple
    reason: str  # "t_end", "drained" or "interval_region"
    t_final: float
    Q_final: tuple
    drain_time: Optional[float] = None

    def at(self, t: float) -> tuple:
        for seg in self.segments:
            if seg.t_start <= t <= seg.t_end:
                dt = t - seg.t_start
                return tuple(max(0.0, q + r * dt) for q, r in zip(seg.Q_start, seg.Qdot))
        if t >= self.t_final:
            return self.Q_final if self.reason != "interval_region" else None
        raise ValueError(f"t={t} is outside the trajectory")


def region_label(sol: RateSolution) -> str:
    j = "".join(str(k) for k in sorted(sol.J)) or "0"
    return f"J={j}"


def select_rates(derived: DerivedQuantities, l: Sequence[int], state: FluidState) -> RateSolution:
    """Rates of the fluid solution leaving ``state``.

    Empty queues whose couplings cannot be met are switched on: the smallest
    superset of the current active set whose rates are feasible and make every
    newly switched-on queue grow is returned.
    """
    J0 = _active(derived, state)
    empty = [k for k in (1, 2, 3) if k not in J0]
    last_err = None
    for n in range(len(empty) + 1):
        for extra in combinations(empty, n):
            J = J0 | set(extra)
            try:
                sol = rates_for(derived, l, J)
            except InfeasibleRegion as exc:
                last_err = exc
                continue
            if not sol.feasible:
                continue
            if all(sol.Qdot[k - 1].lo > TOL for k in extra):
                return sol
    raise InfeasibleRegion(f"no consistent region leaves Q={state.Q}" + (f" ({last_err})" if last_err else ""))


def integrate(
    derived: DerivedQuantities,
    l: Sequence[int],
    q0: Sequence[float],
    t_end: float,
    max_segments: int = 10_000,
) -> Trajectory:
    """Piecewise-linear fluid trajectory for the limited discipline.

    Stops early on entering a region where rates are only known as intervals.
    """
    if any(derived.saturated):
        raise NotApplicable("trajectories are integrated for unsaturated models only")
    Q = [float(x) for x in q0]
    t = 0.0
    segs = []
    while len(segs) < max_segments:
        sol = select_rates(derived, l, FluidState(tuple(Q)))
        if not sol.tight:
            return Trajectory(tuple(segs), "interval_region", t, tuple(Q))
        r = [sol.Qdot[k].lo for k in range(3)]
        if not any(Q) and all(abs(x) <= TOL for x in r):
            return Trajectory(tuple(segs), "drained", t, (0.0, 0.0, 0.0), drain_time=t)
        hits = [Q[k] / -r[k] for k in range(3) if Q[k] > 0 and r[k] < -TOL]
        dt = min(hits, default=math.inf)
        t_next = min(t + dt, t_end)
        segs.append(Segment(t, t_next, tuple(Q), tuple(r), region_label(sol), True))
        span = t_next - t
        hit = t + dt <= t_end
        for k in range(3):
            q = Q[k] + r[k] * span
            if hit and Q[k] > 0 and r[k] < -TOL and Q[k] / -r[k] - dt <= 1e-12 * max(1.0, dt):
                q = 0.0  # this queue set the hitting time
            Q[k] = max(q, 0.0)
        t = t_next
        if t >= t_end:
            return Trajectory(tuple(segs), "t_end", t, tuple(Q))
    raise RuntimeError(f"trajectory needed more than {max_segments} segments")


TRAJECTORY_COLUMNS = ("t", "Q1", "Q2", "Q3", "region", "tight")


def write_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for seg in traj.segments:
            w.writerow([_fmt(seg.t_start), *(_fmt(q) for q in seg.Q_start), seg.region, int(seg.tight)])
        last = traj.segments[-1].region if traj.segments else "J=0"
        tight = 0 if traj.reason == "interval_region" else 1
        w.writerow([_fmt(traj.t_final), *(_fmt(q) for q in traj.Q_final), last, tight])


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# ------------------------------------------------------------ saturated probe


@dataclass(frozen=True)
class SaturatedFractions:
    p: float  # reduced cycles among all cycles
    u4: float  # fraction of time on the 1->3 leg
    r4: float  # 1->3 walks completed per unit time
    rates: RateSolution = field(repr=False, default=None)


def saturated_fractions(derived: DerivedQuantities, l: Sequence[int]) -> SaturatedFractions:
    """Long-run fractions with queue 1 saturated and the other fluid queues empty.

    Exact only for ``l2 == 1``; otherwise the rates are intervals and
    :class:`NotApplicable` is raised.
    """
    if not derived.saturated or not derived.saturated[0]:
        raise NotApplicable("queue 1 must be saturated")
    sol = select_rates(derived, l, FluidState((math.inf, 0.0, 0.0)))
    if not sol.tight:
        raise NotApplicable("rates are not pinned by the fluid equations when l2 > 1")
    e3, e4 = sol.e[2].lo, sol.e[3].lo
    return SaturatedFractions(e4 / e3, sol.U[3].lo, e4, sol)


def residuals(derived: DerivedQuantities, l: Sequence[int], sol: RateSolution, which: str = "lo") -> dict:
    """Residuals of the fluid equations at one end of a solution.

    Equalities report ``|lhs - rhs|``; inequalities report the amount of violation
    (0 when satisfied).  Computed directly in ``T'``/``U'`` form with rates
    ``mu = 1/Es`` and ``nu = 1/Ex`` where those are finite.
    """
    pick = (lambda iv: iv.lo) if which == "lo" else (lambda iv: iv.hi)
    T = [pick(x) for x in sol.T]
    U = [pick(x) for x in sol.U]
    d = [pick(x) for x in sol.d]
    e = [pick(x) for x in sol.e]
    es, ex, lam = derived.mean_service, derived.mean_switchover, derived.lam
    J = sol.J

    def neg(x):
        return max(0.0, -x)

    out = {
        "conservation": abs(sum(T) + sum(U) - 1.0),
        "leg12_balance": abs(e[0] - e[1]),
        "leg3_balance": abs(e[2] - e[0] - e[3]),
        "coupling1": neg(e[0] + e[3] - d[0] / l[0]),
        "coupling2": neg(e[1] - d[1] / l[1]),
        "coupling3": neg(e[2] - d[2] / l[2]),
        "sandwich_lo": neg(e[0] - e[3] - d[1] / l[1]),
        "sandwich_hi": neg(d[1] - (e[0] - e[3])),
    }
    # T' and U' agree with the throughput variables wherever the means are positive
    out["service_rates"] = max((abs(T[k] - es[k] * d[k]) for k in range(3)), default=0.0)
    out["walk_rates"] = max((abs(U[j] - ex[j] * e[j]) for j in range(4)), default=0.0)
    if 1 in J:
        out["active1"] = abs(e[0] + e[3] - d[0] / l[0])
    if 2 in J:
        out["active2"] = max(abs(e[3]), abs(e[1] - d[1] / l[1]))
    if 3 in J:
        out["active3"] = abs(e[2] - d[2] / l[2])
    for k in range(3):
        if (k + 1) not in J:
            out[f"inactive{k + 1}"] = abs(d[k] - lam[k])
    return out
