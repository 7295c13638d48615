"""Closed-form stability and instability conditions.

For the limited discipline three sufficient stability conditions and three
sufficient instability conditions are evaluated.  They coincide when ``l2 == 1``;
otherwise a parameter set may satisfy neither family and is reported as
indeterminate.  Gated and exhaustive systems are stable iff ``rho0 < 1``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import NotLimitedDiscipline, SaturatedModelRejected
from .model import DerivedQuantities, Discipline, ModelParams, derive_quantities

BAND = 1e-12


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class Condition:
    name: str
    value: float
    satisfied: bool  # stability: value < 1; instability: value >= 1
    strict: bool = False  # instability only: value > 1
    near_boundary: bool = False  # |value - 1| within the equality band


@dataclass(frozen=True)
class ConditionReport:
    stable: tuple  # Condition per stability inequality
    unstable: tuple  # Condition per instability inequality


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: Verdict
    transient: bool
    report: ConditionReport

    @property
    def label(self) -> str:
        if self.verdict is Verdict.UNSTABLE:
            return "unstable-transient" if self.transient else "unstable"
        return self.verdict.value


def _near(x: float) -> bool:
    return abs(x - 1.0) <= BAND * max(1.0, abs(x))


def _stab(name, x):
    return Condition(name, x, x < 1.0 - BAND, near_boundary=_near(x))


def _inst(name, x):
    return Condition(name, x, x >= 1.0 - BAND, strict=x > 1.0 + BAND, near_boundary=_near(x))


def _reject_saturated(derived: DerivedQuantities):
    if any(derived.saturated):
        raise SaturatedModelRejected("stability conditions are not defined for a model with a saturated queue")


def _limited_terms(derived, l):
    lam, rho0, z, zs = derived.lam, derived.rho0, derived.zeta, derived.zeta_star
    half_sum, half_diff = (z + zs) / 2.0, (z - zs) / 2.0
    x = [lam[k] / l[k] for k in range(3)]
    return lam, rho0, z, half_sum, half_diff, x


def check_limited(derived: DerivedQuantities, l: Sequence[int], discipline: Optional[Discipline] = None) -> StabilityVerdict:
    """Evaluate both condition families for the limited discipline.

    ``l`` holds the per-queue limits.  Every left-hand side is computed from means
    only, so zero service or switch-over means are harmless.
    """
    if discipline is not None and not discipline.is_limited:
        raise NotLimitedDiscipline(f"check_limited needs a limited discipline, got {discipline.value}")
    _reject_saturated(derived)
    lam, rho0, z, hs, hd, x = _limited_terms(derived, l)
    stable = (
        _stab("st1", rho0 + x[1] * z),
        _stab("st2", rho0 + min(x[0] * hs + lam[1] * hd, x[0] * z)),
        _stab("st3", rho0 + min(x[2] * hs + lam[1] * hd, x[2] * z)),
    )
    unstable = (
        _inst("inst1", rho0 + x[1] * z),
        _inst("inst2", rho0 + x[0] * hs + x[1] * hd),
        _inst("inst3", rho0 + x[2] * hs + x[1] * hd),
    )
    report = ConditionReport(stable, unstable)
    if any(c.satisfied for c in unstable):
        return StabilityVerdict(Verdict.UNSTABLE, any(c.strict for c in unstable), report)
    if all(c.satisfied for c in stable):
        return StabilityVerdict(Verdict.STABLE, False, report)
    return StabilityVerdict(Verdict.INDETERMINATE, False, report)


def check_gated_exhaustive(derived: DerivedQuantities) -> StabilityVerdict:
    _reject_saturated(derived)
    rho0 = derived.rho0
    report = ConditionReport((_stab("load_below_one", rho0),), (_inst("load_at_least_one", rho0),))
    inst = report.unstable[0]
    if inst.satisfied:
        return StabilityVerdict(Verdict.UNSTABLE, inst.strict, report)
    return StabilityVerdict(Verdict.STABLE, False, report)


def check(params: ModelParams) -> StabilityVerdict:
    """Dispatch on the discipline of ``params``."""
    derived = derive_quantities(params)
    if params.discipline.is_limited:
        return check_limited(derived, params.limits)
    return check_gated_exhaustive(derived)


def divergence_rates(derived: DerivedQuantities, l: Sequence[int]) -> tuple:
    """Guaranteed growth rates of the fluid queues started empty, one per queue.

    A positive entry certifies that the corresponding fluid queue grows at least
    that fast; all entries are nonpositive for parameters meeting every stability
    inequality.
    """
    _reject_saturated(derived)
    lam, rho0, z, hs, hd, x = _limited_terms(derived, l)
    es = derived.mean_service
    out = []
    for j in range(3):
        if j == 1:
            out.append(l[1] * (x[1] * z - 1.0 + rho0) / (z + l[1] * es[1]))
        else:
            out.append(l[j] * (x[j] * hs + x[1] * hd - 1.0 + rho0) / (hs + l[j] * es[j]))
    return tuple(out)


def verdict_record(v: StabilityVerdict) -> dict:
    """Flat mapping suitable for one CSV row."""
    row = {}
    for c in v.report.stable:
        row[f"{c.name}_value"] = c.value
        row[f"{c.name}_holds"] = c.satisfied
    for c in v.report.unstable:
        row[f"{c.name}_value"] = c.value
        row[f"{c.name}_holds"] = c.satisfied
        row[f"{c.name}_strict"] = c.strict
    row["near_boundary"] = any(c.near_boundary for c in v.report.stable + v.report.unstable)
    row["verdict"] = v.label
    return row
