"""Scaling balance, norm-ratio scans, witness search, duality pipeline."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mblab.estimator as est
from mblab.bellman import BellmanPoint, bellman_point, conjugate_exponent, linear_candidate
from mblab.estimator import (
    EstimateError,
    duality_bound,
    duality_candidate,
    hoelder_objective,
    kappa_constant,
    lower_bound_search,
    lp_constant_scan,
    optimal_lambda,
    optimal_lambda_numeric,
    point_in_box,
)
from mblab.martingale import average, inner, lp_norm


def pt(x1, x2, x3, x4, p=2.0):
    return BellmanPoint(x1=np.atleast_1d(np.asarray(x1, dtype=float)), x2=x2, x3=x3, x4=x4, p=p)


# ---------------------------------------------------------------------------
# scaling balance


def test_optimal_lambda_reference_values():
    assert optimal_lambda(2.0, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert optimal_lambda(2.0, 1.0, 16.0) == pytest.approx(2.0, rel=1e-15)
    assert optimal_lambda(1.5, 1.0, 1.0) == pytest.approx(2.0 ** (2.0 / 9.0), rel=1e-14)


def test_optimal_lambda_rejects_nonpositive_moments():
    for x3, x4 in ((0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, -2.0)):
        with pytest.raises(ValueError):
            optimal_lambda(2.0, x3, x4)


def test_optimal_lambda_agrees_with_golden_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        p = float(rng.uniform(1.05, 2.0))
        x3 = float(10.0 ** rng.uniform(-3, 3))
        x4 = float(10.0 ** rng.uniform(-3, 3))
        a = optimal_lambda(p, x3, x4)
        b = optimal_lambda_numeric(p, x3, x4)
        assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


def test_optimal_lambda_is_strict_minimizer():
    for p, x3, x4 in ((2.0, 3.0, 0.5), (1.5, 0.2, 7.0), (1.2, 1.0, 1.0)):
        lam = optimal_lambda(p, x3, x4)
        at_min = hoelder_objective(lam, p, x3, x4)
        assert at_min < hoelder_objective(lam * 1.01, p, x3, x4)
        assert at_min < hoelder_objective(lam * 0.99, p, x3, x4)


def test_kappa_constant():
    assert kappa_constant(2.0) == pytest.approx(2.0, rel=1e-15)
    # minimized objective equals kappa times the balanced moment product
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = float(rng.uniform(1.05, 2.0))
        q = conjugate_exponent(p)
        x3 = float(10.0 ** rng.uniform(-2, 2))
        x4 = float(10.0 ** rng.uniform(-2, 2))
        lam = optimal_lambda(p, x3, x4)
        val = hoelder_objective(lam, p, x3, x4)
        target = kappa_constant(p) * x3 ** (q / (p + q)) * x4 ** (p / (p + q))
        assert val == pytest.approx(target, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(
    p=st.floats(1.01, 2.0),
    lx3=st.floats(-4, 4),
    lx4=st.floats(-4, 4),
)
def test_stationarity_property(p, lx3, lx4):
    x3, x4 = 10.0**lx3, 10.0**lx4
    lam = optimal_lambda(p, x3, x4)
    q = conjugate_exponent(p)
    derivative = p * lam ** (p - 1.0) * x3 - q * lam ** (-q - 1.0) * x4
    scale = p * lam ** (p - 1.0) * x3 + q * lam ** (-q - 1.0) * x4
    assert abs(derivative) <= 1e-9 * scale


# ---------------------------------------------------------------------------
# ratio scan


def test_scan_contraction_at_p2():
    res = lp_constant_scan(2.0, 300, seed=2)
    assert res.max_ratio <= 1.0 + 1e-9
    assert res.trials == 300
    assert sum(res.counts) == 300
    assert res.argmax["trial"] >= 0


def test_scan_below_two_is_finite():
    res = lp_constant_scan(1.5, 200, seed=3, delta=0.25, dim=2)
    assert math.isfinite(res.max_ratio)
    assert res.max_ratio > 0.0


def test_scan_is_deterministic():
    a = lp_constant_scan(2.0, 100, seed=4)
    b = lp_constant_scan(2.0, 100, seed=4)
    assert a.max_ratio == b.max_ratio
    assert a.argmax == b.argmax
    assert a.counts == b.counts


# ---------------------------------------------------------------------------
# witness search


def test_search_structured_witness_hits_one():
    res = lower_bound_search(2.0, 5, seed=5)
    assert res.history[0] == pytest.approx(1.0, abs=1e-12)
    assert res.best >= 1.0 - 1e-12
    assert res.found


def test_search_seed_prefix_stability():
    short = lower_bound_search(2.0, 20, seed=6)
    long = lower_bound_search(2.0, 60, seed=6)
    assert short.history == long.history[:20]
    assert long.best >= short.best - 1e-15


def test_search_scalar_target_gates_found():
    ok = lower_bound_search(2.0, 5, seed=7, target=0.9)
    assert ok.found
    not_ok = lower_bound_search(2.0, 5, seed=7, target=1.5)
    assert not not_ok.found
    assert not_ok.best == ok.best


def test_search_best_recomputes_from_witness():
    res = lower_bound_search(1.5, 40, seed=8, delta=0.25, dim=2)
    filt, f, g, op = res.state
    q = conjugate_exponent(1.5)
    direct = abs(inner(g, op.apply(f))) / (
        lp_norm(f, 1.5) * lp_norm(g, q) * filt.total_measure
    )
    assert direct == pytest.approx(res.best, rel=1e-10, abs=1e-10)


def test_search_target_point_box_feasible():
    target = pt(0.0, 0.0, 1.0, 1.0)
    res = lower_bound_search(2.0, 20, seed=9, target_point=target, box=0.25)
    assert res.found
    assert res.best >= 1.0 - 1e-12
    assert res.achieved_point is not None
    assert point_in_box(res.achieved_point, target, 0.25)


def test_search_target_point_box_empty_is_reported_not_raised():
    far = pt(0.0, 0.0, 500.0, 500.0)
    res = lower_bound_search(2.0, 10, seed=10, target_point=far, box=0.05)
    assert not res.found
    assert math.isnan(res.best)
    assert res.witness == {}
    assert res.achieved_point is None


def test_search_ascent_never_hurts():
    base = lower_bound_search(1.5, 15, seed=11, delta=0.25, ascent_steps=0)
    refined = lower_bound_search(1.5, 15, seed=11, delta=0.25, ascent_steps=150)
    assert refined.best >= base.best - 1e-15
    assert refined.history == base.history


def test_search_consistent_with_verified_candidate():
    # a certified upper bound evaluated at the achieved point dominates the
    # searched objective
    from mblab.bellman import quadratic_candidate

    res = lower_bound_search(2.0, 25, seed=12)
    cand = quadratic_candidate(0.5)
    assert cand.evaluate(res.achieved_point) >= res.best - 1e-6


# ---------------------------------------------------------------------------
# duality


def test_duality_bound_p2():
    rep = duality_bound(2.0, delta=0.25, n_g=8, seed=0)
    assert rep.ok
    assert rep.empirical_max <= rep.analytic_bound + 1e-6
    assert len(rep.rows) == 8
    for row in rep.rows:
        assert row["objective"] <= row["bound"] + 1e-9 * max(1.0, row["bound"])


def test_duality_bound_below_two():
    rep = duality_bound(1.5, delta=0.25, n_g=8, seed=0)
    assert rep.ok
    assert rep.q == pytest.approx(3.0, rel=1e-14)
    assert rep.empirical_max <= rep.analytic_bound + 1e-6


def test_duality_candidate_shapes():
    assert duality_candidate(2.0, 0.25).cp == pytest.approx(1.0 / math.sqrt(0.5), rel=1e-15)
    low = duality_candidate(1.5, 0.25)
    assert low.p == 1.5
    assert low.cp == pytest.approx(4.0 / math.sqrt(0.5), rel=1e-15)


def test_duality_reports_failed_certification(monkeypatch):
    monkeypatch.setattr(est, "duality_candidate", lambda p, d: linear_candidate(1.0, p, d))
    with pytest.raises(EstimateError) as exc:
        duality_bound(2.0, delta=0.25, n_g=4, seed=0)
    assert exc.value.certificate is not None
    assert not exc.value.certificate.ok


# ---------------------------------------------------------------------------
# homogeneity orbit


def test_homogeneity_orbit_on_witness(small_cells):
    pc = small_cells[4]  # delta 0.25, dim 2
    filt = pc.filtration
    p = 2.0
    q = conjugate_exponent(p)
    base_pt = bellman_point(pc.f, pc.g, pc.op, filt.root.id, p)
    centered = pc.f.shift(-average(pc.f, filt.root.id))
    base_obj = inner(pc.g, pc.op.apply(centered)) / filt.total_measure
    for lam in (0.5, 2.0, 7.0):
        f_s = pc.f * lam
        g_s = pc.g * (1.0 / lam)
        obj = inner(g_s, pc.op.apply(f_s.shift(-average(f_s, filt.root.id)))) / filt.total_measure
        assert obj == pytest.approx(base_obj, rel=1e-12)
        mapped = bellman_point(f_s, g_s, pc.op, filt.root.id, p)
        assert np.allclose(mapped.x1, lam * base_pt.x1, rtol=1e-12, atol=1e-14)
        assert mapped.x2 == pytest.approx(lam ** (-2.0) * base_pt.x2, rel=1e-12, abs=1e-14)
        assert mapped.x3 == pytest.approx(lam**p * base_pt.x3, rel=1e-12)
        assert mapped.x4 == pytest.approx(lam ** (-q) * base_pt.x4, rel=1e-12)
