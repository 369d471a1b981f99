import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jccopt import (BiAffineConstraint, BisectionConfig, CapacityError,
                    CcpProblem, JccGroup, ModelError, Polytope, SampleSet,
                    init_bounds, inner_alternation, out_of_sample_reliability,
                    s_step, shortfalls, solve_also_x_multi,
                    solve_also_x_single, solve_cvar,
                    solve_intuitive_extension, solve_oracle, z_step)
from jccopt.algorithms import gamma_value, mean_value_lp, z_step_lp
from jccopt.model import RelaxationState
from jccopt import lp
from jccopt.toys import (INTERVAL_BOUNDS, TWO_GROUP_BOUNDS, interval_toy,
                         two_group_toy)

from helpers import random_instance


def interval_cfg():
    return BisectionConfig(*INTERVAL_BOUNDS, delta1=1e-4)


# -- z step -------------------------------------------------------------------

def test_z_step_worked_example():
    s = np.array([5.0, 1.0, 2.0, 3.0, 4.0])
    z = z_step(s, 0.2)
    np.testing.assert_array_equal(z, [0.0, 1.0, 1.0, 1.0, 1.0])
    assert z @ s == 10.0


def test_z_step_zero_shortfalls_keep_everything():
    np.testing.assert_array_equal(z_step(np.zeros(6), 0.5), np.ones(6))


def test_z_step_eps_zero_keeps_everything():
    np.testing.assert_array_equal(z_step(np.array([3.0, 1.0]), 0.0), np.ones(2))


def test_z_step_fractional_slot():
    # n=3, eps=0.5: one full drop plus half a drop on the runner-up
    z = z_step(np.array([3.0, 2.0, 1.0]), 0.5)
    np.testing.assert_allclose(z, [0.0, 0.5, 1.0])
    assert np.mean(z) == pytest.approx(0.5)


def test_z_step_tie_breaks_by_index():
    z = z_step(np.array([2.0, 2.0, 2.0, 1.0]), 0.5)
    np.testing.assert_array_equal(z, [0.0, 0.0, 1.0, 1.0])


def test_z_step_matches_lp_on_200_draws():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        s = rng.exponential(1.0, size=n) * rng.integers(0, 2, size=n)
        eps = float(rng.uniform(0.0, 0.95))
        z = z_step(s, eps)
        assert np.all((0.0 <= z) & (z <= 1.0))
        assert np.mean(z) >= 1.0 - eps - 1e-12
        z_ref = z_step_lp(s, eps)
        assert z @ s <= z_ref @ s + 1e-9


# -- s step -------------------------------------------------------------------

def test_s_step_closed_form_shortfalls():
    p = interval_toy(0.4)
    x, s, status = s_step(p, RelaxationState.full_activation(p), f=8.0)
    assert status == lp.OPTIMAL
    lo, hi = p.groups[0].samples.data.T
    expected = np.maximum(np.maximum(lo - x[0], x[0] - hi), 0.0)
    np.testing.assert_allclose(s[0], expected, atol=1e-9)


def test_s_step_all_satisfiable_gives_zero():
    # one scenario, wide interval: nothing to relax
    g = JccGroup(
        constraints=[BiAffineConstraint(A=np.zeros((2, 1)), a0=[1.0, 0.0], c=[-1.0]),
                     BiAffineConstraint(A=np.zeros((2, 1)), a0=[0.0, -1.0], c=[1.0])],
        samples=SampleSet([[0.0, 10.0]]), epsilon=0.0)
    p = CcpProblem(objective=[1.0], polytope=Polytope(lower=[-100.0]), groups=[g])
    x, s, status = s_step(p, [np.ones(1)], f=100.0)
    assert status == lp.OPTIMAL
    np.testing.assert_allclose(s[0], [0.0], atol=1e-12)


def test_s_step_monotone_in_rho():
    base = random_instance(7)
    robust = CcpProblem(
        objective=base.objective, polytope=base.polytope,
        groups=[JccGroup(g.constraints, g.samples, g.epsilon, 0.1, g.norm,
                         g.label + "-rho")
                for g in base.groups])
    plain = CcpProblem(
        objective=base.objective, polytope=base.polytope,
        groups=[JccGroup(g.constraints, g.samples, g.epsilon, 0.0, g.norm,
                         g.label)
                for g in base.groups])
    f = 3.0
    z = [np.ones(g.n) for g in base.groups]
    _, s_plain, st1 = s_step(plain, z, f)
    _, s_rob, st2 = s_step(robust, z, f)
    assert st1 == st2 == lp.OPTIMAL
    for a, b in zip(s_plain, s_rob):
        assert np.all(b >= a - 1e-9)


def test_s_step_level_below_polytope_minimum_is_infeasible():
    p = random_instance(3)  # objective coefficients >= 0.5, x >= 0
    x, s, status = s_step(p, [np.ones(g.n) for g in p.groups], f=-1.0)
    assert status == lp.INFEASIBLE
    assert x is None and s is None


def test_s_step_rejects_l2_groups():
    p = interval_toy(0.4, rho=0.1)
    p.groups[0].norm = "l2"
    with pytest.raises(ModelError, match="l2"):
        s_step(p, RelaxationState.full_activation(p), f=8.0)


# -- inner alternation ---------------------------------------------------------

def test_inner_alternation_one_shot_at_loose_level():
    res = inner_alternation(interval_toy(0.4), 8.0, interval_cfg())
    assert res.reason == "gamma"
    assert res.iterations == 1
    assert res.gamma == 0.0


def test_inner_alternation_tight_level_stays_positive():
    res = inner_alternation(interval_toy(0.4), 0.5, interval_cfg())
    assert res.lp_feasible  # x=0.5 is inside the polytope
    assert res.reason in ("delta", "max_inner")
    assert res.gamma > 0.0


def test_gamma_sequences_nonincreasing():
    for seed in range(5):
        p = two_group_toy(seed)
        for f in (2.0, 3.0, 4.0, 6.0):
            res = inner_alternation(p, f, BisectionConfig(*TWO_GROUP_BOUNDS))
            for a, b in zip(res.gammas, res.gammas[1:]):
                assert b <= a + 1e-12


# -- bounds -------------------------------------------------------------------

def test_init_bounds_interval_toy():
    assert init_bounds(interval_toy(0.4)) == (3.0, 6.0)


def test_init_bounds_uses_cvar_when_feasible():
    p = random_instance(11)
    f_lo, f_hi = init_bounds(p)
    cvar = solve_cvar(p)
    assert cvar.is_feasible
    assert f_hi == pytest.approx(cvar.objective)
    assert f_lo <= f_hi


def test_init_bounds_zero_lower_guard():
    # free objective weight 0: mean LP gives 0; CVaR infeasible as in the
    # interval toy at eps=0.2 -> guard upper bound 1
    p = interval_toy(0.2)
    q = CcpProblem(objective=[0.0], polytope=p.polytope, groups=p.groups)
    assert init_bounds(q) == (0.0, 1.0)


def test_mean_value_lp_is_deterministic_counterpart():
    p = interval_toy(0.4)
    sol = lp.solve_lp(mean_value_lp(p))
    assert sol.status == lp.OPTIMAL
    assert sol.objective == pytest.approx(3.0)  # mean bounds [3, 5]


# -- frozen interval-toy table --------------------------------------------------

TABLE = {0.0: None, 0.2: None, 0.4: 3.0, 0.6: 2.0, 0.8: 1.0}


@pytest.mark.parametrize("eps,expected", sorted(TABLE.items()))
def test_interval_table_multi(eps, expected):
    r = solve_also_x_multi(interval_toy(eps), interval_cfg())
    if expected is None:
        assert not r.is_feasible
        assert r.f_upper == INTERVAL_BOUNDS[1]  # never lowered
    else:
        assert r.is_feasible
        assert r.objective == pytest.approx(expected, abs=1e-4)
        assert r.per_group[0].violation_rate <= eps + 1e-12


@pytest.mark.parametrize("eps,expected", sorted(TABLE.items()))
def test_interval_table_single(eps, expected):
    r = solve_also_x_single(interval_toy(eps), interval_cfg())
    if expected is None:
        assert not r.is_feasible
    else:
        assert r.objective == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("eps,expected", sorted(TABLE.items()))
def test_interval_table_oracle(eps, expected):
    r = solve_oracle(interval_toy(eps))
    if expected is None:
        assert not r.is_feasible
    else:
        assert r.objective == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("eps", sorted(TABLE))
def test_interval_cvar_always_infeasible(eps):
    assert not solve_cvar(interval_toy(eps)).is_feasible


# -- solver behavior ------------------------------------------------------------

def test_single_group_solver_rejects_multi_group():
    with pytest.raises(ModelError, match="multi"):
        solve_also_x_single(two_group_toy(0))


def test_two_group_exact_rates_and_ordering():
    p = two_group_toy(0)
    rm = solve_also_x_multi(p, BisectionConfig(*TWO_GROUP_BOUNDS))
    ri = solve_intuitive_extension(p, BisectionConfig(*TWO_GROUP_BOUNDS))
    assert (rm.per_group[0].violation_rate, rm.per_group[1].violation_rate) \
        == (16 / 20, 4 / 20)
    d1 = BisectionConfig(*TWO_GROUP_BOUNDS).resolved_delta1()
    assert rm.objective <= ri.objective + d1


def test_solver_reports_are_deterministic():
    p = two_group_toy(5)
    a = solve_also_x_multi(p, BisectionConfig(*TWO_GROUP_BOUNDS))
    b = solve_also_x_multi(p, BisectionConfig(*TWO_GROUP_BOUNDS))
    assert np.array_equal(a.x, b.x)
    assert a.objective == b.objective
    assert [t.to_dict() for t in a.trace] == [t.to_dict() for t in b.trace]


def test_trace_records_bisection_path():
    r = solve_also_x_multi(interval_toy(0.4), interval_cfg())
    assert r.trace, "bisection should test at least one level"
    assert any(t.accepted for t in r.trace)
    fs = [t.f for t in r.trace]
    assert all(INTERVAL_BOUNDS[0] < f < INTERVAL_BOUNDS[1] for f in fs)
    assert r.f_upper - r.f_lower <= 1e-4 + 1e-15


def test_cvar_eps_zero_is_worst_case():
    g = JccGroup(
        constraints=[BiAffineConstraint(A=np.zeros((2, 1)), a0=[1.0, 0.0], c=[-1.0]),
                     BiAffineConstraint(A=np.zeros((2, 1)), a0=[0.0, -1.0], c=[1.0])],
        samples=SampleSet([[1.0, 9.0], [2.0, 8.0]]), epsilon=0.0)
    p = CcpProblem(objective=[1.0], polytope=Polytope(), groups=[g])
    r = solve_cvar(p)
    assert r.is_feasible
    assert r.objective == pytest.approx(2.0)  # x >= max lo


def test_oracle_capacity_guard():
    g = JccGroup(
        constraints=[BiAffineConstraint(A=np.zeros((1, 1)), a0=[1.0], c=[-1.0])],
        samples=SampleSet(np.linspace(0, 1, 40)[:, None]), epsilon=0.5)
    p = CcpProblem(objective=[1.0], polytope=Polytope(lower=[0.0]), groups=[g])
    with pytest.raises(CapacityError, match="cap"):
        solve_oracle(p)


def test_out_of_sample_reliability_interval():
    p = interval_toy(0.4)
    rates = out_of_sample_reliability(np.array([3.0]), p.groups,
                                      [p.groups[0].samples])
    assert rates == [0.6]
    with pytest.raises(ModelError, match="one test set"):
        out_of_sample_reliability(np.array([3.0]), p.groups, [])
    with pytest.raises(ModelError, match="empty"):
        out_of_sample_reliability(np.array([3.0]), p.groups,
                                  [SampleSet(np.zeros((0, 2)))])


def test_multi_rejects_l2_groups():
    p = interval_toy(0.4, rho=0.05)
    p.groups[0].norm = "l2"
    with pytest.raises(ModelError, match="l2"):
        solve_also_x_multi(p, interval_cfg())
    with pytest.raises(ModelError, match="l2"):
        solve_cvar(p)


def test_gamma_value_weighs_groups_equally():
    z = [np.ones(2), np.ones(4)]
    s = [np.array([1.0, 1.0]), np.zeros(4)]
    assert gamma_value(z, s) == pytest.approx(0.5)


# -- sandwich spot-check (full 50-instance sweep lives in test_acceptance) -----

@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_sandwich_spot(seed):
    p = random_instance(seed)
    oracle = solve_oracle(p)
    multi = solve_also_x_multi(p)
    intuitive = solve_intuitive_extension(p)
    cvar = solve_cvar(p)
    d1 = 1e-4 * max(1.0, sum(init_bounds(p)))
    if cvar.is_feasible:
        assert multi.is_feasible
        assert multi.objective <= cvar.objective + d1
    if oracle.is_feasible and multi.is_feasible and intuitive.is_feasible:
        assert oracle.objective <= multi.objective
        assert multi.objective <= intuitive.objective


@given(st.integers(100, 10 ** 6))
@settings(max_examples=15, deadline=None)
def test_feasible_reports_meet_risk_levels(seed):
    p = random_instance(seed)
    r = solve_also_x_multi(p)
    if r.is_feasible:
        for g_stats in r.per_group:
            assert g_stats.violation_rate <= g_stats.epsilon + 1e-12
        assert r.objective == pytest.approx(float(p.objective @ r.x))
