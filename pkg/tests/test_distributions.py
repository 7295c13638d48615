import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_polling import distributions as dist
from adaptive_polling.distributions import (
    Deterministic, Exponential, ParetoDensity, Sampler, TwoPoint, UniformByMean, Weibull,
)
from adaptive_polling.errors import InvalidSpec, MomentInfinite

from _scenarios import R2, TAU2

ALL_SPECS = [
    Deterministic(0.0), Deterministic(2.5), UniformByMean(4.0), Exponential(4.0),
    ParetoDensity(2.0, 2.0), ParetoDensity(8 - 4 * R2, 1 + R2), ParetoDensity(1.0, 5.0),
    Weibull(0.5, 4.0), Weibull(2.0, 4.0), Weibull(0.18, 4.0), TwoPoint(4 * (2 - R2), (2 + R2) / 4, 4 * (2 + R2)),
]


def test_mean_examples():
    assert dist.mean(UniformByMean(4.0)) == 4.0
    # integral of x * 8 / x**3 over [2, inf) is 4
    assert dist.mean(ParetoDensity(2.0, 2.0)) == pytest.approx(4.0, rel=1e-15)
    assert dist.mean(TAU2[5]) == pytest.approx(4.0, rel=1e-14)


def test_moment_examples():
    assert dist.moment(Exponential(4.0), 2) == 32.0
    assert dist.moment(Exponential(4.0), 3) == 384.0
    assert dist.moment(TAU2[4], 2) == pytest.approx(32.0, rel=1e-12)


def test_moment_errors():
    with pytest.raises(MomentInfinite):
        dist.moment(ParetoDensity(2.0, 2.0), 2)
    with pytest.raises(InvalidSpec):
        dist.moment(Exponential(-1.0), 1)
    with pytest.raises(InvalidSpec):
        dist.moment(Exponential(1.0), 0)


def test_moment_matching_fixtures():
    for k in (1, 2):
        assert dist.moment(TAU2[3], k) == pytest.approx(dist.moment(TAU2[4], k), rel=1e-9)
    for k in (1, 2, 3):
        assert dist.moment(TAU2[3], k) == pytest.approx(dist.moment(TAU2[5], k), rel=1e-9)
    # the fourth moments differ, so the laws are genuinely different
    assert abs(dist.moment(TAU2[3], 4) - dist.moment(TAU2[5], 4)) > 1.0


@pytest.mark.parametrize("spec", ALL_SPECS, ids=repr)
def test_first_moment_is_mean(spec):
    assert dist.moment(spec, 1) == dist.mean(spec)


def test_weibull_scale_examples():
    assert dist.weibull_scale(1.0, 4.0) == pytest.approx(0.25, rel=1e-15)
    assert dist.weibull_scale(2.0, 4.0) == pytest.approx((math.sqrt(math.pi) / 8) ** 2, rel=1e-14)
    assert dist.weibull_scale(0.5, 4.0) == pytest.approx(math.sqrt(0.5), rel=1e-14)


@given(a=st.floats(0.1, 30.0), m=st.floats(1e-3, 1e3))
def test_weibull_scale_gives_target_mean(a, m):
    from scipy import stats

    b = dist.weibull_scale(a, m)
    # tail exp(-b x**a) is scipy's weibull_min with shape a and scale b**(-1/a)
    assert stats.weibull_min(a, scale=b ** (-1.0 / a)).mean() == pytest.approx(m, rel=1e-10)
    assert dist.mean(Weibull(a, m)) == pytest.approx(m, rel=1e-10)


def test_sample_examples():
    assert dist.sample(Sampler(Deterministic(0.0)), 0.37) == 0.0
    assert dist.sample(Sampler(UniformByMean(4.0)), 0.5) == 4.0
    a, m, u = 2.0, 4.0, 0.3
    b = dist.weibull_scale(a, m)
    assert dist.sample(Sampler(Weibull(a, m)), u) == pytest.approx((-math.log(1 - u) / b) ** (1 / a), rel=1e-15)
    with pytest.raises(ValueError):
        dist.sample(Sampler(Exponential(1.0)), 0.0)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=repr)
def test_sampling_is_pure_and_nonnegative(spec):
    rng = np.random.default_rng(7)
    u = rng.random(1000) * (1 - 2e-16) + 1e-16
    s1 = Sampler(spec).sample(u)
    s2 = Sampler(spec).sample(u.copy())
    assert np.array_equal(s1, s2)
    assert np.all(s1 >= 0)
    assert all(Sampler(spec).sample(float(x)) == y for x, y in zip(u[:20], s1[:20]))


@pytest.mark.parametrize("spec", ALL_SPECS, ids=repr)
def test_empirical_mean_within_five_standard_errors(spec):
    rng = np.random.default_rng(2024)
    n = 1_000_000
    x = Sampler(spec).sample((rng.integers(0, 1 << 53, n) + 0.5) / (1 << 53))
    m = dist.mean(spec)
    try:
        var = dist.moment(spec, 2) - m * m
    except MomentInfinite:
        pytest.skip("infinite variance: the standard error is undefined")
    se = math.sqrt(max(var, 0.0) / n)
    assert abs(x.mean() - m) <= 5 * se + 1e-12 * max(1.0, m)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=repr)
def test_dict_round_trip(spec):
    assert dist.spec_from_dict(dist.spec_to_dict(spec)) == spec


@pytest.mark.parametrize("bad", [
    {"dist": "exponential", "mean": -1},
    {"dist": "pareto", "xmin": 1, "shape": 1.0},
    {"dist": "two_point", "x1": 1, "p1": 1.5, "x2": 2},
    {"dist": "uniform", "mean": 1, "extra": 2},
    {"dist": "gamma", "mean": 1},
    {"dist": "weibull", "shape": 2},
    {"dist": "deterministic", "value": float("nan")},
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(InvalidSpec):
        dist.spec_from_dict(bad)


def test_gamma_accuracy_range():
    # the Weibull scale only needs Gamma on (1, 3]; compare against an independent integral
    from scipy import integrate

    for x in np.linspace(0.5, 30, 60):
        ref, _ = integrate.quad(lambda t: t ** (x - 1) * math.exp(-t), 0, math.inf, limit=400)
        assert math.gamma(x) == pytest.approx(ref, rel=1e-8)
