import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ordstat import alpha_analysis as A
from ordstat import models as M
from ordstat import risk_engine as R
from ordstat.errors import UnknownPanel
from ordstat.estimators import EstimatorSpec, named_estimator

import _oracles as O

LAMS = [0.0, 0.5, 1.0, 2.0, 5.0]


def test_blee_risk_is_flat_in_lambda():
    m = M.exponential_location(1.5, 0.7)
    s = named_estimator(m, "blee", "theta1")
    for lam in (0.0, 1.0, 7.0):
        assert R.quadrature_risk_location(m, s, lam) == pytest.approx(1.5 ** 2, rel=1e-8)
    c = R.simulate_risk(m, s, LAMS, n=40_000)
    assert np.all(np.abs(c.risk - 2.25) < 4 * c.std_err)


MC_QUAD_CASES = [
    (M.bivariate_normal(1, 2, 0.3), EstimatorSpec("theta1", "location", 0.0, 0.2, 0.4)),
    (M.bivariate_normal(2, 1, -0.5), EstimatorSpec("theta2", "location", 0.0, -0.3, 0.7)),
    (M.exponential_location(1, 2), EstimatorSpec("theta1", "location", 1.0, 2 / 3, 0.3)),
    (M.exponential_location(2, 1), EstimatorSpec("theta2", "location", 1.0, 2.0, 0.1)),
]


@pytest.mark.parametrize("model, spec", MC_QUAD_CASES)
def test_monte_carlo_matches_quadrature(model, spec):
    c = R.simulate_risk(model, spec, LAMS, n=100_000, seed=17)
    exact = np.array([R.quadrature_risk_location(model, spec, lam) for lam in LAMS])
    assert np.all(np.abs(c.risk - exact) < 4 * c.std_err), (c.risk, exact, c.std_err)


def test_standard_error_is_that_of_the_mean():
    m = M.bivariate_normal(1, 1, 0)
    s = named_estimator(m, "blee", "theta2")         # loss = Z2^2, variance 2
    c = R.simulate_risk(m, s, [0.0], n=50_000)
    assert c.std_err[0] == pytest.approx(np.sqrt(2 / 50_000), rel=0.05)


def test_common_random_numbers_across_estimator_sets():
    m = M.gamma_scale(1, 1)
    a = named_estimator(m, "bsee", "theta1")
    b = named_estimator(m, "gamma-dominator", "theta1")
    alone = R.simulate_risk(m, b, [1.0, 3.0], n=20_000, seed=5)
    both = R.simulate_risks(m, [a, b], [1.0, 3.0], n=20_000, seed=5)
    assert np.array_equal(alone.risk, both[1].risk)
    other = R.simulate_risk(m, b, [1.0, 3.0], n=20_000, seed=6)
    assert not np.array_equal(alone.risk, other.risk)


@settings(max_examples=20)
@given(st.integers(-20, 20), st.sampled_from(["theta1", "theta2"]))
def test_scale_risk_invariant_to_theta1(k, target):
    m = M.gamma_scale(0.8, 1.7)
    s = named_estimator(m, "ire-bsee", target) if target == "theta1" else named_estimator(m, "bsee", target)
    base = R.simulate_risk(m, s, [1.0, 2.5], n=4_096, seed=3)
    moved = R.simulate_risk(m, s, [1.0, 2.5], n=4_096, seed=3, theta1=2.0 ** k)
    assert np.allclose(moved.risk, base.risk, rtol=1e-12)


@settings(max_examples=20)
@given(st.floats(-1e3, 1e3))
def test_location_risk_invariant_to_theta1(t1):
    m = M.exponential_location(1, 1)
    s = named_estimator(m, "ire-blee", "theta1")
    base = R.simulate_risk(m, s, [0.0, 2.0], n=4_096, seed=3)
    moved = R.simulate_risk(m, s, [0.0, 2.0], n=4_096, seed=3, theta1=t1)
    assert np.allclose(moved.risk, base.risk, rtol=1e-9, atol=1e-9)


def test_reruns_are_identical_across_worker_counts():
    m = M.exponential_location(1, 0.5)
    s = named_estimator(m, "exp-dominator", "theta1")
    one = R.simulate_risk(m, s, n=30_000, seed=11)
    many = R.simulate_risk(m, s, n=30_000, seed=11, workers=4)
    assert one.risk.tobytes() == many.risk.tobytes()
    assert one.std_err.tobytes() == many.std_err.tobytes()


@pytest.mark.parametrize("model, target, comp, lam", [
    (M.bivariate_normal(1, 2, 0.3), "theta1", 0.0, 1.0),
    (M.exponential_location(1, 1), "theta1", 0.5, 0.5),
    (M.exponential_location(2, 1), "theta2", 2.0, 3.0),
])
def test_alpha_is_pointwise_optimal_location(model, target, comp, lam):
    best = A.alpha_value(model, target, comp, lam)
    c0 = M.blee_bsee_constants(model)[0 if target == "theta1" else 1]
    at = lambda a: R.quadrature_risk_location(model, EstimatorSpec(target, "location", c0, comp, a), lam)
    r_best = at(best)
    for a in np.linspace(best - 2, best + 2, 21):
        assert r_best <= at(a) + 1e-10


def test_alpha_is_pointwise_optimal_scale():
    best = A.alpha_value(M.gamma_scale(1, 1), "theta1", 1.0, 2.0)
    r_best = O.risk("gamma", (1, 1), "theta1", 0.5, 1.0, best, 2.0)
    for a in np.linspace(best - 0.6, best + 0.6, 7):
        assert r_best <= O.risk("gamma", (1, 1), "theta1", 0.5, 1.0, a, 2.0) + 1e-10


def test_self_comparison_is_a_tie():
    m = M.gamma_scale(2, 1)
    s = named_estimator(m, "bsee", "theta1")
    rep = R.dominance_report(m, s, s, [1.0, 2.0, 4.0], n=10_000)
    assert np.all(rep.gap == 0) and np.all(rep.se == 0)
    assert rep.verdict == "DominatesWithinMC"


def test_dominance_verdicts():
    m = M.exponential_location(1, 1)
    good = named_estimator(m, "exp-dominator", "theta1")
    base = named_estimator(m, "blee", "theta1")
    rep = R.dominance_report(m, good, base, n=20_000)
    assert rep.verdict == "DominatesWithinMC"
    assert all(set(c) == {"lambda", "gap", "se", "z"} for c in rep.cells)
    bad = EstimatorSpec("theta1", "location", 1.0, 0.5, 3.0)
    assert R.dominance_report(m, bad, base, n=20_000).verdict == "NoDominance"
    with pytest.raises(ValueError):
        R.dominance_report(m, good, named_estimator(m, "blee", "theta2"))


def test_verdict_rule():
    se = np.ones(3)
    assert R._verdict(np.array([0.0, 2.9, -10.0]), se) == "DominatesWithinMC"
    assert R._verdict(np.array([3.5, -3.5, 0.0]), se) == "Mixed"
    assert R._verdict(np.array([3.5, 0.0, 0.0]), se) == "NoDominance"


def test_grid_and_kind_validation():
    m = M.gamma_scale(1, 1)
    s = named_estimator(m, "bsee", "theta1")
    with pytest.raises(ValueError):
        R.simulate_risk(m, s, [0.5])
    with pytest.raises(ValueError):
        R.simulate_risk(M.exponential_location(1, 1), s, [1.0])
    with pytest.raises(ValueError):
        R.quadrature_risk_location(m, s, 1.0)


@pytest.mark.parametrize("fig, panel, ncurves", [(1, (0.5, 1.5), 4), (2, (0.8, 0.5), 3)])
def test_figure_structure(fig, panel, ncurves):
    res = R.reproduce_figure(fig, panel, n=2_000)
    assert len(res.curves) == ncurves
    assert all(c.lambda_grid.size == 30 and c.risk.size == 30 for c in res.curves)
    assert len(res.reports) == ncurves - 1
    assert res.name == f"fig{fig}_{panel[0]:g},{panel[1]:g}"


@pytest.mark.parametrize("fig, panel", [(3, (1, 1)), (1, (9, 9)), (2, ("a", 1)), (2, (1.0,))])
def test_unknown_panels(fig, panel):
    with pytest.raises(UnknownPanel):
        R.reproduce_figure(fig, panel, n=1_000)
