"""Primitive probability laws: validation, analytic moments and inverse-transform sampling.

Every law is parameterised by its mean (or by explicit support points), never by a
rate, so that zero-duration activities such as ``Deterministic(0)`` are representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidSpec, MomentInfinite

__all__ = [
    "Deterministic",
    "UniformByMean",
    "Exponential",
    "ParetoDensity",
    "Weibull",
    "TwoPoint",
    "DistributionSpec",
    "Sampler",
    "mean",
    "moment",
    "weibull_scale",
    "sample",
    "spec_from_dict",
    "spec_to_dict",
]


@dataclass(frozen=True)
class Deterministic:
    value: float


@dataclass(frozen=True)
class UniformByMean:
    """Uniform on the open interval ``(0, 2 * mean)``."""

    mean: float


@dataclass(frozen=True)
class Exponential:
    mean: float


@dataclass(frozen=True)
class ParetoDensity:
    """Density ``shape * xmin**shape / x**(shape + 1)`` for ``x >= xmin``."""

    xmin: float
    shape: float


@dataclass(frozen=True)
class Weibull:
    """Tail ``exp(-b * x**shape_a)`` with ``b`` chosen so the mean is ``mean``."""

    shape_a: float
    mean: float


@dataclass(frozen=True)
class TwoPoint:
    """``x1`` with probability ``p1``, otherwise ``x2``."""

    x1: float
    p1: float
    x2: float


DistributionSpec = Union[Deterministic, UniformByMean, Exponential, ParetoDensity, Weibull, TwoPoint]


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_spec(spec: DistributionSpec) -> None:
    """Raise :class:`InvalidSpec` if any field is out of range."""
    if isinstance(spec, Deterministic):
        ok = _finite(spec.value) and spec.value >= 0
    elif isinstance(spec, (UniformByMean, Exponential)):
        ok = _finite(spec.mean) and spec.mean > 0
    elif isinstance(spec, ParetoDensity):
        ok = _finite(spec.xmin) and _finite(spec.shape) and spec.xmin > 0 and spec.shape > 1
    elif isinstance(spec, Weibull):
        ok = _finite(spec.shape_a) and _finite(spec.mean) and spec.shape_a > 0 and spec.mean > 0
    elif isinstance(spec, TwoPoint):
        ok = (
            _finite(spec.x1) and _finite(spec.x2) and _finite(spec.p1)
            and spec.x1 >= 0 and spec.x2 >= 0 and 0.0 <= spec.p1 <= 1.0
        )
    else:
        raise InvalidSpec(f"unknown distribution spec {spec!r}")
    if not ok:
        raise InvalidSpec(f"invalid parameters in {spec!r}")


def weibull_scale(shape_a: float, target_mean: float) -> float:
    """Return ``b`` such that the law with tail ``exp(-b x**a)`` has mean ``target_mean``."""
    if not (shape_a > 0 and target_mean > 0):
        raise InvalidSpec("weibull_scale needs shape_a > 0 and target_mean > 0")
    return (math.gamma(1.0 + 1.0 / shape_a) / target_mean) ** shape_a


def moment(spec: DistributionSpec, order: int) -> float:
    """Exact raw moment ``E[X**order]``."""
    validate_spec(spec)
    if not isinstance(order, int) or order < 1:
        raise InvalidSpec(f"moment order must be an integer >= 1, got {order!r}")
    k = order
    if isinstance(spec, Deterministic):
        return float(spec.value) ** k
    if isinstance(spec, UniformByMean):
        return (2.0 * spec.mean) ** k / (k + 1)
    if isinstance(spec, Exponential):
        return math.factorial(k) * spec.mean**k
    if isinstance(spec, ParetoDensity):
        if k >= spec.shape:
            raise MomentInfinite(f"moment {k} of {spec!r} is infinite")
        return spec.shape * spec.xmin**k / (spec.shape - k)
    if isinstance(spec, Weibull):
        b = weibull_scale(spec.shape_a, spec.mean)
        return math.gamma(1.0 + k / spec.shape_a) / b ** (k / spec.shape_a)
    # TwoPoint
    return spec.p1 * spec.x1**k + (1.0 - spec.p1) * spec.x2**k


def mean(spec: DistributionSpec) -> float:
    return moment(spec, 1)


class Sampler:
    """Inverse-transform sampler for one validated spec.

    ``sample`` accepts a scalar or an ndarray of uniforms strictly inside (0, 1)
    and is a pure function of its input.
    """

    __slots__ = ("spec", "_scale")

    def __init__(self, spec: DistributionSpec):
        validate_spec(spec)
        self.spec = spec
        self._scale = weibull_scale(spec.shape_a, spec.mean) if isinstance(spec, Weibull) else None

    def __repr__(self):
        return f"Sampler({self.spec!r})"

    @property
    def is_constant(self) -> bool:
        s = self.spec
        return isinstance(s, Deterministic) or (isinstance(s, TwoPoint) and (s.p1 in (0.0, 1.0) or s.x1 == s.x2))

    def sample(self, u):
        s = self.spec
        scalar = np.ndim(u) == 0
        # scalars go through the array path too, so they match block sampling bit for bit
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if isinstance(s, Deterministic):
            x = np.full(u.shape, float(s.value))
        elif isinstance(s, UniformByMean):
            x = 2.0 * s.mean * u
        elif isinstance(s, Exponential):
            x = -s.mean * np.log1p(-u)
        elif isinstance(s, ParetoDensity):
            x = s.xmin * (1.0 - u) ** (-1.0 / s.shape)
        elif isinstance(s, Weibull):
            x = (-np.log1p(-u) / self._scale) ** (1.0 / s.shape_a)
        else:
            x = np.where(u < s.p1, float(s.x1), float(s.x2))
        return float(x[0]) if scalar else x


def sample(sampler: Sampler, uniform_draw: float) -> float:
    if not 0.0 < uniform_draw < 1.0:
        raise ValueError("uniform_draw must lie strictly inside (0, 1)")
    return sampler.sample(uniform_draw)


_DIST_FIELDS = {
    "deterministic": (Deterministic, ("value",)),
    "uniform": (UniformByMean, ("mean",)),
    "exponential": (Exponential, ("mean",)),
    "pareto": (ParetoDensity, ("xmin", "shape")),
    "weibull": (Weibull, ("shape", "mean")),
    "two_point": (TwoPoint, ("x1", "p1", "x2")),
}


def spec_from_dict(d: dict) -> DistributionSpec:
    """Build a spec from its canonical JSON form, e.g. ``{"dist": "weibull", "shape": 2, "mean": 4}``."""
    if not isinstance(d, dict) or "dist" not in d:
        raise InvalidSpec(f"distribution must be an object with a 'dist' key, got {d!r}")
    kind = d["dist"]
    if kind not in _DIST_FIELDS:
        raise InvalidSpec(f"unknown dist {kind!r}; expected one of {sorted(_DIST_FIELDS)}")
    cls, fields = _DIST_FIELDS[kind]
    extra = set(d) - set(fields) - {"dist"}
    missing = set(fields) - set(d)
    if extra or missing:
        raise InvalidSpec(f"dist {kind!r}: unknown keys {sorted(extra)}, missing keys {sorted(missing)}")
    values = []
    for f in fields:
        v = d[f]
        if not _finite(v):
            raise InvalidSpec(f"dist {kind!r}: field {f!r} must be a finite number, got {v!r}")
        values.append(float(v))
    spec = cls(*values)
    validate_spec(spec)
    return spec


def spec_to_dict(spec: DistributionSpec) -> dict:
    for kind, (cls, fields) in _DIST_FIELDS.items():
        if isinstance(spec, cls):
            attrs = ("shape_a", "mean") if cls is Weibull else fields
            return {"dist": kind, **{f: getattr(spec, a) for f, a in zip(fields, attrs)}}
    raise InvalidSpec(f"unknown distribution spec {spec!r}")
