"""System parameters, derived load quantities and the cycle-type rule."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from . import distributions as dist
from .distributions import Deterministic, DistributionSpec
from .errors import InconsistentInput, InvalidParams, InvalidSpec

LEG_NAMES = ("s12", "s23", "s31", "s13")


class Discipline(enum.Enum):
    """Service discipline applied at every queue.

    ``LIMITED`` serves until ``l_k`` customers are done or the queue empties, so
    customers arriving during the visit may be served.  ``LIMITED_GATED`` serves at
    most ``min(l_k, customers present when the server arrives)``.  Both obey the same
    fluid equations and stability conditions.
    """

    LIMITED = "limited"
    LIMITED_GATED = "limited-gated"
    GATED = "gated"
    EXHAUSTIVE = "exhaustive"

    @property
    def is_limited(self) -> bool:
        return self in (Discipline.LIMITED, Discipline.LIMITED_GATED)


class CycleType(enum.Enum):
    STANDARD = "standard"  # 1 -> 2 -> 3 -> 1
    REDUCED = "reduced"  # 1 -> 3 -> 1


@dataclass(frozen=True)
class ModelParams:
    """Full parameterisation of the three-queue adaptive polling system.

    ``switchover`` is indexed by leg: 1->2, 2->3, 3->1, 1->3.  ``interarrival[k]``
    may be ``None`` for a saturated queue.
    """

    interarrival: tuple
    service: tuple
    switchover: tuple
    discipline: Discipline = Discipline.LIMITED
    limits: tuple = (1, 1, 1)
    saturated: tuple = (False, False, False)

    def __post_init__(self):
        for name in ("interarrival", "service", "switchover", "limits", "saturated"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not isinstance(self.discipline, Discipline):
            object.__setattr__(self, "discipline", Discipline(self.discipline))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedQuantities:
    lam: tuple  # arrival rates, 0 for saturated queues
    mean_service: tuple
    beta: tuple
    rho0: float
    mean_switchover: tuple  # per leg, zero permitted
    zeta: float
    zeta_star: float
    saturated: tuple = (False, False, False)
    warnings: tuple = field(default=())


def validate(params: ModelParams) -> list:
    """Return a list of problems; entries starting with ``warning:`` are not fatal."""
    problems = []
    if len(params.interarrival) != 3 or len(params.service) != 3:
        problems.append("interarrival and service need exactly 3 entries")
        return problems
    if len(params.switchover) != 4:
        problems.append("switchover needs exactly 4 legs (s12, s23, s31, s13)")
        return problems
    if len(params.limits) != 3 or len(params.saturated) != 3:
        problems.append("limits and saturated need exactly 3 entries")
        return problems

    def check(spec, label):
        if spec is None:
            problems.append(f"{label} is missing")
            return None
        try:
            return dist.mean(spec)
        except InvalidSpec as exc:
            problems.append(f"{label}: {exc}")
            return None

    for k in range(3):
        if params.saturated[k]:
            if not params.discipline.is_limited:
                problems.append(f"queue {k + 1}: saturation is only supported under the limited discipline")
            if params.interarrival[k] is not None:
                check(params.interarrival[k], f"queue {k + 1} interarrival")
        else:
            m = check(params.interarrival[k], f"queue {k + 1} interarrival")
            if m is not None and m <= 0:
                problems.append(f"queue {k + 1} interarrival mean must be > 0")
        check(params.service[k], f"queue {k + 1} service")
    legs = [check(s, f"switchover {n}") for s, n in zip(params.switchover, LEG_NAMES)]
    if params.discipline.is_limited:
        for k, lim in enumerate(params.limits):
            if not isinstance(lim, int) or isinstance(lim, bool) or lim < 1:
                problems.append(f"queue {k + 1}: limit must be >= 1, got {lim!r}")
    if all(m is not None for m in legs):
        zeta = legs[0] + legs[1] + legs[2]
        zeta_star = legs[2] + legs[3]
        if zeta <= 0:
            problems.append("the standard cycle needs a positive mean switch-over time")
        if not zeta > zeta_star:
            problems.append(
                f"warning: zeta={zeta:g} <= zeta*={zeta_star:g}; skipping queue 2 does not shorten the cycle"
            )
    return problems


def _errors(problems):
    return [p for p in problems if not p.startswith("warning:")]


def derive_quantities(params: ModelParams) -> DerivedQuantities:
    problems = validate(params)
    errs = _errors(problems)
    if errs:
        raise InvalidParams(errs)
    lam = tuple(
        0.0 if params.saturated[k] else 1.0 / dist.mean(params.interarrival[k]) for k in range(3)
    )
    es = tuple(dist.mean(s) for s in params.service)
    beta = tuple(l * s for l, s in zip(lam, es))
    ex = tuple(dist.mean(s) for s in params.switchover)
    return DerivedQuantities(
        lam=lam,
        mean_service=es,
        beta=beta,
        rho0=sum(beta),
        mean_switchover=ex,
        zeta=ex[0] + ex[1] + ex[2],
        zeta_star=ex[2] + ex[3],
        saturated=tuple(bool(s) for s in params.saturated),
        warnings=tuple(p for p in problems if p.startswith("warning:")),
    )


def next_cycle_type(current: CycleType, q2_found_empty: Optional[bool]) -> CycleType:
    if current is CycleType.REDUCED:
        if q2_found_empty is not None:
            raise InconsistentInput("a reduced cycle does not visit queue 2")
        return CycleType.STANDARD
    if q2_found_empty is None:
        raise InconsistentInput("a standard cycle must report whether queue 2 was found empty")
    return CycleType.REDUCED if q2_found_empty else CycleType.STANDARD


def cycle_types(q2_bits: Sequence[Optional[bool]]) -> list:
    """Cycle-type sequence generated by the per-cycle queue-2 observations.

    ``q2_bits[n]`` is ignored (may be anything) for reduced cycles.
    """
    out = [CycleType.STANDARD]
    for bit in q2_bits:
        cur = out[-1]
        out.append(next_cycle_type(cur, None if cur is CycleType.REDUCED else bool(bit)))
    return out


def scale_time(params: ModelParams, c: float) -> ModelParams:
    """Multiply every time mean by ``c`` (used by scale-covariance checks)."""

    def sc(s):
        if s is None:
            return None
        if isinstance(s, Deterministic):
            return Deterministic(s.value * c)
        if isinstance(s, (dist.UniformByMean, dist.Exponential)):
            return type(s)(s.mean * c)
        if isinstance(s, dist.ParetoDensity):
            return dist.ParetoDensity(s.xmin * c, s.shape)
        if isinstance(s, dist.Weibull):
            return dist.Weibull(s.shape_a, s.mean * c)
        return dist.TwoPoint(s.x1 * c, s.p1, s.x2 * c)

    return params.with_(
        interarrival=tuple(sc(s) for s in params.interarrival),
        service=tuple(sc(s) for s in params.service),
        switchover=tuple(sc(s) for s in params.switchover),
    )


def symmetric_params(
    lam: Sequence[float],
    mean_service: Sequence[float],
    mean_switchover: Sequence[float],
    limits=(1, 1, 1),
    discipline=Discipline.LIMITED,
    family=dist.Exponential,
) -> ModelParams:
    """Convenience constructor from rates and means, using one law family throughout.

    A zero mean is always mapped to ``Deterministic(0)``.
    """

    def law(m):
        return Deterministic(0.0) if m == 0 else family(float(m))

    return ModelParams(
        interarrival=tuple(law(1.0 / l) for l in lam),
        service=tuple(law(m) for m in mean_service),
        switchover=tuple(law(m) for m in mean_switchover),
        discipline=discipline,
        limits=tuple(limits),
    )
