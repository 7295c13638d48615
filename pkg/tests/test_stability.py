import numpy as np
import pytest

from adaptive_polling import simulation as sim
from adaptive_polling.errors import NotLimitedDiscipline, SaturatedModelRejected
from adaptive_polling.model import Discipline, derive_quantities, scale_time, symmetric_params
from adaptive_polling.stability import (
    Verdict, check, check_gated_exhaustive, check_limited, divergence_rates, verdict_record,
)

from _scenarios import INDETERMINATE, STABLE, TAU2, UNSTABLE, params_of, saturated_setup


def values(v):
    return [c.value for c in v.report.stable], [c.value for c in v.report.unstable]


def test_stable_example():
    v = check(params_of(STABLE))
    st, inst = values(v)
    assert st == pytest.approx([0.6, 0.6, 0.6], abs=1e-14)
    assert v.verdict is Verdict.STABLE and v.label == "stable"


def test_unstable_example():
    v = check(params_of(UNSTABLE))
    st, inst = values(v)
    assert inst[0] == pytest.approx(1.4, abs=1e-14)
    assert v.report.unstable[0].strict
    assert v.label == "unstable-transient"


def test_indeterminate_example():
    v = check(params_of(INDETERMINATE))
    st, inst = values(v)
    assert st == pytest.approx([0.57, 1.02, 0.48], abs=1e-14)
    assert inst == pytest.approx([0.57, 0.87, 0.51], abs=1e-14)
    assert not v.report.stable[1].satisfied
    assert v.verdict is Verdict.INDETERMINATE


@pytest.mark.parametrize(
    "lam, es, label",
    [
        ((0.25, 0.25, 0.25), (0, 1, 1.5), "stable"),
        ((0.5, 0.25, 0.25), (1, 1, 1), "unstable"),
        ((1, 1, 1), (1, 1, 1), "unstable-transient"),
    ],
)
@pytest.mark.parametrize("disc", [Discipline.GATED, Discipline.EXHAUSTIVE])
def test_gated_exhaustive(lam, es, label, disc):
    v = check(symmetric_params(lam, es, (1, 1, 1, 1), discipline=disc))
    assert v.label == label
    rec = verdict_record(v)
    assert rec["verdict"] == label
    assert {"load_below_one_value", "load_at_least_one_strict"} <= set(rec)


def _random_derived(rng, l2):
    lam = rng.uniform(0.001, 0.5, 3)
    es = rng.uniform(0.0, 3.0, 3)
    ex = rng.uniform(0.0, 2.0, 4)
    if ex[:3].sum() == 0:
        ex[0] = 1.0
    limits = (int(rng.integers(1, 6)), l2, int(rng.integers(1, 6)))
    return derive_quantities(symmetric_params(lam, es, ex, limits)), limits


def test_l2_one_is_never_indeterminate():
    rng = np.random.default_rng(20240601)
    counts = {v: 0 for v in Verdict}
    for _ in range(10_000):
        d, l = _random_derived(rng, 1)
        counts[check_limited(d, l).verdict] += 1
    assert counts[Verdict.INDETERMINATE] == 0
    # the sample covers both sides of the boundary
    assert counts[Verdict.STABLE] > 100 and counts[Verdict.UNSTABLE] > 100


def test_l2_above_one_can_be_indeterminate():
    rng = np.random.default_rng(7)
    seen = {check_limited(*_random_derived(rng, 4)).verdict for _ in range(3_000)}
    assert Verdict.INDETERMINATE in seen


def test_monotone_in_arrival_rates():
    rng = np.random.default_rng(3)
    for _ in range(2_000):
        lam = rng.uniform(0.001, 0.4, 3)
        es = rng.uniform(0.0, 3.0, 3)
        ex = rng.uniform(0.1, 2.0, 4)
        ex[3] = min(ex[3], ex[0] + ex[1])  # keep zeta >= zeta*
        limits = tuple(int(x) for x in rng.integers(1, 6, 3))
        k = int(rng.integers(0, 3))
        lam2 = lam.copy()
        lam2[k] *= rng.uniform(1.0, 3.0)
        a = check(symmetric_params(lam, es, ex, limits)).verdict
        b = check(symmetric_params(lam2, es, ex, limits)).verdict
        assert not (a is Verdict.UNSTABLE and b is Verdict.STABLE)


def test_scale_invariance():
    rng = np.random.default_rng(11)
    for _ in range(500):
        lam = rng.uniform(0.001, 0.4, 3)
        p = symmetric_params(lam, rng.uniform(0, 3, 3), rng.uniform(0.1, 2, 4), (1, 3, 2))
        c = float(rng.uniform(0.01, 100))
        a, b = check(p), check(scale_time(p, c))
        va, vb = values(a), values(b)
        assert vb[0] == pytest.approx(va[0], rel=1e-12)
        assert vb[1] == pytest.approx(va[1], rel=1e-12)
        if not any(x.near_boundary for x in a.report.stable + a.report.unstable):
            assert a.label == b.label


def test_divergence_rates():
    up = divergence_rates(derive_quantities(params_of(UNSTABLE)), UNSTABLE["limits"])
    assert up[1] == pytest.approx(0.1, abs=1e-14)
    down = divergence_rates(derive_quantities(params_of(STABLE)), STABLE["limits"])
    assert all(r < 0 for r in down)
    # rho0 = 1 - lam2 * zeta / l2 exactly
    edge = symmetric_params((0.1, 0.2, 0.1), (1, 1, 1), (1, 1, 1, 1))
    assert divergence_rates(derive_quantities(edge), (1, 1, 1))[1] == pytest.approx(0.0, abs=1e-15)


def test_boundary_band():
    edge = symmetric_params((0.1, 0.2, 0.1), (1, 1, 1), (1, 1, 1, 1))
    v = check(edge)
    c = v.report.unstable[0]
    assert c.satisfied and not c.strict and c.near_boundary
    assert v.label == "unstable"
    assert verdict_record(v)["near_boundary"] is True


def test_rejections():
    with pytest.raises(SaturatedModelRejected):
        check(saturated_setup(TAU2[1]))
    d = derive_quantities(params_of(STABLE))
    with pytest.raises(NotLimitedDiscipline):
        check_limited(d, (1, 1, 1), Discipline.GATED)
    with pytest.raises(SaturatedModelRejected):
        check_gated_exhaustive(derive_quantities(saturated_setup(TAU2[1])))


def test_stable_verdict_shows_no_trend():
    p = params_of(STABLE)
    s = sim.Simulator(p, seed=8)
    ts, qs = [], []
    for _ in range(40):
        s.run_cycles(25_000)
        st = s.state
        ts.append(st.clock)
        qs.append(sum(st.Q))
    slope = np.polyfit(ts, qs, 1)[0]
    # an unstable example of the same size grows at 0.1 per unit time
    assert slope < 1e-3
    assert s.max_total_queue < 200
