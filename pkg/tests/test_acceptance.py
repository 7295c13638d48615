"""Acceptance checks.  Each test prints one PASS/FAIL line for its criterion.

The reproduction runs use 10**7 measured cycles after a 10**5-cycle warmup and
take a few minutes in total.  Set ADAPTIVE_POLLING_LONG=1 to add the 10**8-cycle
run with the tight tolerance.
"""
import functools
import math
import os

import numpy as np
import pytest

from adaptive_polling import config as cfg, distributions as dist, experiments as ex, fluid, simulation as sim
from adaptive_polling.errors import InvariantViolation
from adaptive_polling.fluid import FluidState
from adaptive_polling.model import Discipline, derive_quantities, symmetric_params
from adaptive_polling.stability import Verdict, check, check_limited, divergence_rates

from _scenarios import INDETERMINATE, STABLE, TAU2, UNSTABLE, params_of, saturated_setup

WARMUP = 100_000
MEASURED = 10_000_000
SEED = 1
pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")

    return emit


@functools.lru_cache(maxsize=None)
def bundled_estimate(name, shape=None, measured=MEASURED, seed=SEED):
    doc = cfg.load_bundled(name).raw
    if shape is not None:
        doc = ex.set_path(doc, "queues.1.interarrival.shape", shape)
    est, _ = sim.run(cfg.from_dict(doc).params, measured + WARMUP, WARMUP, seed)
    return est


def example_check(name, p_tol=ex.P_TOL, u4_tol=ex.U4_TOL, measured=MEASURED):
    p_ref, u4_ref = (r.value for r in ex.SCENARIOS[name].refs)
    est = bundled_estimate(name, measured=measured)
    ok = abs(est.p - p_ref) <= p_tol and abs(est.r4 - u4_ref) <= u4_tol
    # published u4 figures are walks per unit time (r4); see README
    text = (f"{name} p={est.p:.4f}+-{est.p_halfwidth:.4f} (ref {p_ref} +-{p_tol}), "
            f"r4={est.r4:.4f}+-{est.r4_halfwidth:.4f} (ref u4 {u4_ref} +-{u4_tol})")
    return ok, text


def test_criterion_1_example1(report):
    ok, text = example_check("example1")
    report(1, ok, text)
    assert ok


def test_criterion_2_examples_2_to_5(report):
    results = [example_check(f"example{i}") for i in (2, 3, 4, 5)]
    ok = all(r[0] for r in results)
    report(2, ok, "; ".join(r[1] for r in results))
    assert ok


def test_criterion_3_distribution_sensitivity(report):
    e3, e4, e5 = (TAU2[i] for i in (3, 4, 5))
    m2 = all(math.isclose(dist.moment(e3, k), dist.moment(e4, k), rel_tol=1e-9) for k in (1, 2))
    m3 = all(math.isclose(dist.moment(e3, k), dist.moment(e5, k), rel_tol=1e-9) for k in (1, 2, 3))
    p3, p4, p5 = (bundled_estimate(f"example{i}").p for i in (3, 4, 5))
    ok = m2 and m3 and abs(p3 - p4) > 0.05 and abs(p3 - p5) > 0.005
    report(3, ok, f"moments match {m2 and m3}; |p3-p4|={abs(p3 - p4):.4f} > 0.05, |p3-p5|={abs(p3 - p5):.4f} > 0.005")
    assert ok


def test_criterion_4_weibull_table_and_limit(report):
    parts, ok = [], True
    for a in ex.TABLE1_SPOT:
        ref = ex.TABLE1[a][0]
        est = bundled_estimate("table1", shape=float(a))
        good = abs(est.p - ref) <= ex.TABLE_P_TOL
        ok &= good
        parts.append(f"a={a:g} p={est.p:.4f} (ref {ref})")

    # full grid at 10**6 cycles per row, common random numbers
    shapes = sorted(ex.TABLE1)
    rows = [bundled_estimate("table1", shape=float(a), measured=1_000_000) for a in shapes]
    bad = [
        (a, b) for a, b, r, s in zip(shapes, shapes[1:], rows, rows[1:])
        if not (s.p < r.p or s.p - s.p_halfwidth <= r.p + r.p_halfwidth)
    ]
    ok &= not bad
    parts.append(f"24-row sweep decreasing up to CI overlap: {not bad}{' ' + str(bad) if bad else ''}")

    lim = bundled_estimate("fig1_limit")
    good = abs(lim.p - ex.FIG1_LIMIT) <= ex.P_TOL
    ok &= good
    parts.append(f"constant interarrivals p={lim.p:.4f} (ref {ex.FIG1_LIMIT} +-{ex.P_TOL})")
    report(4, ok, "; ".join(parts))
    assert ok


def test_criterion_5_stability_classifier(report):
    rng = np.random.default_rng(5)
    indeterminate = 0
    for _ in range(10_000):
        lam = rng.uniform(0.001, 0.5, 3)
        es = rng.uniform(0.0, 3.0, 3)
        exm = rng.uniform(0.0, 2.0, 4)
        exm[0] += 1e-3
        limits = (int(rng.integers(1, 6)), 1, int(rng.integers(1, 6)))
        d = derive_quantities(symmetric_params(lam, es, exm, limits))
        indeterminate += check_limited(d, limits).verdict is Verdict.INDETERMINATE
    labels = [check(params_of(c)).label for c in (STABLE, UNSTABLE, INDETERMINATE)]
    ok = indeterminate == 0 and labels == ["stable", "unstable-transient", "indeterminate"]
    report(5, ok, f"indeterminate at l2=1: {indeterminate}/10000; worked examples -> {labels}")
    assert ok


def test_criterion_6_fluid_oracle(report):
    limits = (1, 1, 2)
    p = saturated_setup(None, limits=limits, discipline=Discipline.LIMITED, lam2=0.1)
    oracle = fluid.saturated_fractions(derive_quantities(p), limits)
    est, _ = sim.run(p, MEASURED + WARMUP, WARMUP, SEED)
    rp, ru = abs(est.p / oracle.p - 1), abs(est.u4 / oracle.u4 - 1)
    ok = rp <= 0.01 and ru <= 0.01
    report(6, ok, f"p={est.p:.5f} vs fluid {oracle.p:.5f} (rel {rp:.2%}), "
                  f"u4={est.u4:.5f} vs fluid {oracle.u4:.5f} (rel {ru:.2%})")
    assert ok


def test_criterion_7_invariants(report):
    parts, problems = [], []
    # event-level counting, sandwich and saturated-visit checks run inside the kernel
    runs = [symmetric_params((0.1, 0.2, 0.1), (1, 1, 1), (1, 1, 1, 0.5), (2, 2, 2), disc) for disc in Discipline]
    runs.append(saturated_setup(TAU2[2]))
    for p in runs:
        s = sim.Simulator(p, 3, check=True)
        try:
            s.run_events(1_000_000)
        except InvariantViolation as exc:
            problems.append(f"{p.discipline.value}: {exc}")
            continue
        r = s.record
        if abs(sum(r.T) + sum(r.U) - r.elapsed) > 1e-9 * r.elapsed:
            problems.append(f"clock drift under {p.discipline.value}")
    parts.append(f"{len(runs)} checked 10**6-event runs")

    rng = np.random.default_rng(7)
    worst, n_exact, n_drain, n_gated = 0.0, 0, 0, 0
    for _ in range(3_000):
        lam = rng.uniform(0.001, 0.5, 3)
        es = rng.uniform(0.0, 3.0, 3)
        exm = rng.uniform(0.05, 2.0, 4)
        l = (int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        d = derive_quantities(symmetric_params(lam, es, exm, l))
        for J in ({1, 2, 3}, {1, 2}, {2, 3}, {2}, {1, 3}, {1}, {3}, set()):
            try:
                sol = fluid.rates_for(d, l, J)
            except fluid.InfeasibleRegion:
                continue
            if sol.feasible and all(x.exact for x in sol.T + sol.U + sol.d + sol.e):
                worst = max(worst, max(fluid.residuals(d, l, sol).values()))
                n_exact += 1
        l1 = (l[0], 1, l[2])
        d1 = derive_quantities(symmetric_params(lam, es, exm, l1))
        if check_limited(d1, l1).verdict is Verdict.STABLE:
            q0 = tuple(rng.dirichlet((1, 1, 1)) * rng.uniform(0, 1))
            try:
                rep = fluid.lyapunov_drift(d1, l1, FluidState(q0))
            except fluid.NotApplicable:
                rep = None
            if rep is not None:
                traj = fluid.integrate(d1, l1, q0, rep.delta + 1.0)
                if not (traj.reason == "drained" and traj.drain_time <= rep.delta):
                    problems.append(f"no drain within delta from {q0}")
                n_drain += 1
        rho0 = float(rng.uniform(0.01, 0.99))
        dg = derive_quantities(symmetric_params((rho0 / 3,) * 3, (1, 1, 1), (1, 1, 1, 1), discipline=Discipline.GATED))
        q = tuple(rng.uniform(0, 1, 3))
        w = fluid.lyapunov_drift(dg, (1, 1, 1), FluidState(q), Discipline.GATED).w_prime
        if not w.lo == w.hi == dg.rho0 - 1.0:
            problems.append(f"gated drift {w} at rho0={dg.rho0}")
        n_gated += 1
    ok = worst <= 1e-12 and not problems
    parts.append(f"max residual {worst:.1e} over {n_exact} exact solutions")
    parts.append(f"{n_drain} trajectories drained within delta")
    parts.append(f"gated drift = rho0-1 in {n_gated} states")
    report(7, ok, "; ".join(parts + problems[:3]))
    assert ok


def test_criterion_8_divergence(report):
    d = derive_quantities(params_of(UNSTABLE))
    bound = max(divergence_rates(d, UNSTABLE["limits"]))
    s = sim.Simulator(params_of(UNSTABLE), seed=SEED)
    s.run_cycles(1_000_000)
    st = s.state
    growth = sum(st.Q) / st.clock
    ok = growth >= 0.9 * bound
    report(8, ok, f"|Q(t)|/t = {growth:.4f} at t={st.clock:.4g}, bound {bound:.4f}, need >= {0.9 * bound:.4f}")
    assert ok


@pytest.mark.skipif(os.environ.get("ADAPTIVE_POLLING_LONG") != "1", reason="set ADAPTIVE_POLLING_LONG=1")
def test_criterion_1_long_run(report):
    ok, text = example_check("example1", p_tol=0.001, u4_tol=0.001, measured=100_000_000)
    report("1 (long)", ok, text)
    assert ok
