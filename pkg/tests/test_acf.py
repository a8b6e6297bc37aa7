import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storagecoop import (
    AcfSet,
    Fleet,
    MarketParams,
    acf_closed_form,
    acf_multi_period,
    acf_two_period,
    gc_closed_form,
    ne_solve,
    sensitivity_experiment,
)
from storagecoop.acf import acf_coefficients, period_partition, revenue_neutrality_check
from storagecoop.errors import DegeneratePeriod, DimensionError
from storagecoop.equilibrium import verify_equilibrium

from conftest import random_instance


def test_canonical_pair_coefficients():
    a, b = acf_coefficients(1.0, 1.0, 2.0)
    assert a == pytest.approx(1.0, abs=1e-15)
    assert b == pytest.approx(-1 / 6, abs=1e-15)


def test_two_period_acf_aligns_and_is_neutral(canonical):
    market, fleet = canonical
    acf = acf_two_period(1.0, fleet)
    np.testing.assert_allclose(acf.a, [[1, 1], [1, 1]])
    np.testing.assert_allclose(acf.b, [[-1 / 12, 1 / 12]] * 2)
    gc = gc_closed_form(market, fleet)
    ane = ne_solve(market, fleet, acf)
    np.testing.assert_allclose(ane.sched, gc.sched, atol=1e-12)
    assert np.max(np.abs(acf.cost(gc.sched).sum(axis=1))) < 1e-15


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 5), st.lists(st.floats(0.1, 5), min_size=1, max_size=8))
def test_two_period_bridge(g, eps):
    # per-period costs from the pair form equal the multi-period closed form
    fleet = Fleet(eps)
    market = MarketParams.two_period(g)
    pair = acf_two_period(g, fleet)
    per = acf_closed_form(market, fleet)
    np.testing.assert_allclose(pair.a, per.a, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(pair.b, per.b, rtol=1e-10, atol=1e-12)


def test_linear_system_matches_closed_form():
    rng = np.random.default_rng(99)
    for _ in range(50):
        market, fleet = random_instance(rng, n_max=8, nt_max=12)
        sys_acf = acf_multi_period(market, fleet)
        cf = acf_closed_form(market, fleet)
        scale = np.max(np.abs(cf.a)) + 1
        np.testing.assert_allclose(sys_acf.a, cf.a, atol=1e-7 * scale)
        np.testing.assert_allclose(sys_acf.b, cf.b, atol=1e-6 * (np.max(np.abs(cf.b)) + 1))


def test_multi_period_alignment_and_neutrality():
    rng = np.random.default_rng(7)
    for _ in range(20):
        market, fleet = random_instance(rng, n_max=6, nt_max=10)
        acf = acf_multi_period(market, fleet)
        gc = gc_closed_form(market, fleet)
        ane = ne_solve(market, fleet, acf)
        assert np.max(np.abs(ane.sched - gc.sched)) < 1e-7
        assert np.max(np.abs(revenue_neutrality_check(acf, gc.sched))) < 1e-9
        assert verify_equilibrium(gc.sched, market, fleet, acf) < 1e-6


def test_literal_selling_rule_aligns_but_is_not_neutral(canonical):
    market, fleet = canonical
    acf = acf_multi_period(market, fleet, sell_coefficient=-3.0)
    gc = gc_closed_form(market, fleet)
    np.testing.assert_allclose(ne_solve(market, fleet, acf).sched, gc.sched, atol=1e-12)
    cost = revenue_neutrality_check(acf, gc.sched)
    assert abs(cost[0, 0]) < 1e-15
    assert cost[0, 1] == pytest.approx(1 / 108, rel=1e-9)


def test_partition_ties_sell():
    market = MarketParams([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
    part = period_partition(market, Fleet([1.0]))
    assert part.t1 == () and part.t2 == (0, 1, 2)


def test_all_zero_schedule_is_degenerate():
    market = MarketParams([2.0, 2.0], [1.0, 1.0])
    with pytest.raises(DegeneratePeriod):
        acf_multi_period(market, Fleet([1.0, 2.0]))


def test_isolated_zero_period_gets_zero_cost():
    # beta equal to lambda* in the middle period: nobody trades there
    market = MarketParams([0.0, 1.0, 2.0], [0.5, 0.5, 0.5])
    fleet = Fleet([1.0, 1.0])
    acf = acf_multi_period(market, fleet)
    gc = gc_closed_form(market, fleet)
    assert abs(gc.sched[0, 1]) < 1e-12
    assert np.all(acf.a[:, 1] == 0) and np.all(acf.b[:, 1] == 0)
    np.testing.assert_allclose(ne_solve(market, fleet, acf).sched, gc.sched, atol=1e-10)


def test_closed_form_is_always_concave():
    rng = np.random.default_rng(4)
    for _ in range(50):
        market, fleet = random_instance(rng)
        acf = acf_closed_form(market, fleet)
        assert np.all(fleet.eps[:, None] + 2 * market.gamma + acf.a > 0)


def test_neutral_costs_never_trigger_concavity_flag():
    # eps + gamma + a = eps - gamma + 2 gamma eps S >= eps + gamma since eps S >= 1
    rng = np.random.default_rng(12)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for _ in range(30):
            market, fleet = random_instance(rng, n_max=8, nt_max=8)
            acf_multi_period(market, fleet)
        acf_multi_period(MarketParams([0.0, 10.0], [5.0, 5.0]), Fleet([0.1, 100.0]))


def test_acf_shape_checks():
    with pytest.raises(DimensionError):
        AcfSet(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        AcfSet.zeros(2, 2).cost(np.zeros((3, 2)))


def test_sensitivity_zero_error_is_gc(canonical):
    market, _ = canonical
    for n in (2, 5, 30):
        fleet = Fleet.identical(n)
        for which in ("sum_inv_eps", "gamma"):
            r = sensitivity_experiment(market, fleet, which, 0.0)
            assert r.profit_misestimated_acf == pytest.approx(r.profit_gc, abs=1e-9)
            assert r.profit_true_acf == pytest.approx(r.profit_gc, abs=1e-9)


def test_sensitivity_rejects_bad_inputs(canonical):
    market, fleet = canonical
    with pytest.raises(ValueError):
        sensitivity_experiment(market, fleet, "eps", 0.1)
    with pytest.raises(ValueError):
        sensitivity_experiment(market, fleet, "gamma", 1.0)


def test_synthetic_day_alignment():
    from pathlib import Path

    from storagecoop.config import ScenarioConfig

    cfg = ScenarioConfig.load(Path(__file__).resolve().parent.parent / "configs" / "fig4.json")
    market, fleet = cfg.build_market(), cfg.build_fleet()
    acf = acf_multi_period(market, fleet)
    gc = gc_closed_form(market, fleet)
    assert np.max(np.abs(ne_solve(market, fleet, acf).sched - gc.sched)) <= 1e-7
    assert np.max(np.abs(revenue_neutrality_check(acf, gc.sched).sum(axis=1))) <= 1e-9


def test_zero_acf_costs_nothing():
    d = np.random.default_rng(0).normal(size=(3, 5))
    assert np.all(revenue_neutrality_check(AcfSet.zeros(3, 5), d) == 0)


def test_pair_costs_are_neutral_per_period(canonical):
    market, fleet = canonical
    cost = acf_two_period(1.0, fleet).cost(gc_closed_form(market, fleet).sched)
    assert np.max(np.abs(cost)) < 1e-15


def test_pair_coefficients_examples():
    assert acf_coefficients(3.0, 2.0, 1 / 3.0) == (pytest.approx(0.0, abs=1e-15), pytest.approx(0.0, abs=1e-15))
    market, fleet = MarketParams.two_period(1.0), Fleet([1.0, 2.0])
    acf = acf_two_period(1.0, fleet)
    np.testing.assert_allclose(acf.a[:, 0], [0.5, 2.0], rtol=1e-14)
    np.testing.assert_allclose(ne_solve(market, fleet, acf).sched, gc_closed_form(market, fleet).sched, atol=1e-12)
