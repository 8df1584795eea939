from fractions import Fraction

import pytest

from eluder_rl.complexity import eluder_dim_exact
from eluder_rl.env import QTable, StochasticSim, augment_initial
from eluder_rl.instances import random_stoch_instance
from eluder_rl.policy import ConstraintSet, EliminationOracle, Finite, UncertaintyItem
from eluder_rl.stack import UncertaintyStack, audit_stack
from eluder_rl.stoch_elim import (Pushed, QUpdated, RunConfig, audit_trace, check_outcome, default_parameters,
                                  explore_stochastic, optimal_parameters, run_policy_elimination)


def two_arm_sim(p_good=Fraction(7, 10), p_bad=Fraction(3, 10)):
    """One real epoch with Bernoulli arms, behind a fixed initial step."""
    base = StochasticSim(1, (0,), (0, 1), 0, 1, kernel={},
                         reward_dist={(0, 0, 0): ((1, p_bad), (0, 1 - p_bad)),
                                      (0, 1, 0): ((1, p_good), (0, 1 - p_good))})
    return augment_initial(base, {0: 1})


def chain_sim(horizon, reward):
    kernel = {(0, a, h): ((0, 1),) for a in (0, 1) for h in range(horizon - 1)}
    rdist = {(0, a, h): ((reward, 1),) for a in (0, 1) for h in range(horizon)}
    return StochasticSim(horizon, (0,), (0, 1), 0, horizon * reward, kernel=kernel, reward_dist=rdist)


def test_default_parameter_examples():
    assert default_parameters(2, 3, 0.5, 1, 0.1, 0.1)[0] == 48
    assert default_parameters(1, 0, 0.5, 1, 0.1, 0.1)[0] == 6
    assert default_parameters(2, 3, 0.5, 1, 0.1, 0.1)[1] == 322


@pytest.mark.parametrize("bad", [dict(gap=0), dict(epsilon=-1), dict(delta=0), dict(reward_bound=0)])
def test_default_parameters_reject_nonpositive(bad):
    args = dict(horizon=2, dim_e=1, gap=0.5, reward_bound=1, epsilon=0.1, delta=0.1) | bad
    with pytest.raises(ValueError):
        default_parameters(**args)


def test_explore_singleton_returns_exact_sum():
    sim = chain_sim(3, Fraction(1, 4))
    space = Finite([{(0, h): 0 for h in range(3)}])
    oracle = EliminationOracle(space, ConstraintSet())
    q, stack = QTable(), UncertaintyStack()
    out = explore_stochastic(sim, (0, 0), 0, oracle, q, 5, stack, sim.session(0))
    assert out == QUpdated(0.75) and q[(0, 0, 0)] == 0.75 and not stack


def test_explore_pushes_largest_uncertain_epoch():
    sim = chain_sim(5, Fraction(1, 10))
    oracle = lambda s, h: (0, 1) if h in (1, 3) else (0,)  # noqa: E731
    stack = UncertaintyStack()
    out = explore_stochastic(sim, (0, 0), 0, oracle, QTable(), 4, stack, sim.session(0))
    assert isinstance(out, Pushed) and out.item.epoch == 3
    assert stack.items == [out.item] and out.item.a1 == 0 and out.item.a2 == 1


def test_explore_mean_of_returns():
    returns = iter([0.2, 0.4, 0.6])
    sim = StochasticSim(1, (0,), (0,), 0, 1, sampler=lambda s, a, h, rng: (None, next(returns)))
    q = QTable()
    out = explore_stochastic(sim, (0, 0), 0, lambda s, h: (0,), q, 3, UncertaintyStack(), sim.session(0))
    assert isinstance(out, QUpdated) and q[(0, 0, 0)] == pytest.approx(0.4)


def _singleton_optimal(inst):
    theta = inst.theta_star
    pairs = inst.space.pairs if hasattr(inst.space, "pairs") else list(inst.space.features)
    return Finite([{p: inst.space.action(theta, *p) for p in pairs}])


def test_agreeing_space_only_clean_rounds():
    inst = random_stoch_instance(4)
    space = _singleton_optimal(inst)
    report = run_policy_elimination(inst.env, space, RunConfig(12, 20))
    assert set(report.events) == {"clean"}
    assert len(report.constraints) == 0
    out = check_outcome(report, inst.env, space, 0.1)
    assert out.all_eps_optimal and out.optimal_survived


def test_two_policy_class_eliminates_inferior_arm():
    sim = two_arm_sim()
    space = Finite([{(0, 1): 0}, {(0, 1): 1}])
    t_star, n = default_parameters(sim.horizon, 1, 0.4, 1, 0.1, 0.1)
    right = 0
    for seed in range(50):
        report = run_policy_elimination(sim, space, RunConfig(t_star, n, seed=seed))
        assert list(report.constraints) in ([(0, 0, 1)], [(0, 1, 1)])
        right += list(report.constraints) == [(0, 0, 1)]
    assert right >= 45  # 1 - delta of 50


@pytest.mark.parametrize("seed", range(6))
def test_random_runs_respect_op_bound_and_audit(seed):
    inst = random_stoch_instance(seed)
    universe = list(inst.space.features)
    dim_e = eluder_dim_exact(inst.space, universe).value
    H = inst.env.horizon
    t_star, n = default_parameters(H, dim_e, inst.gap, inst.env.reward_bound, 0.1, 0.1)
    report = run_policy_elimination(inst.env, inst.space, RunConfig(t_star, min(n, 150), seed=seed))
    assert report.stack_rounds() <= 3 * H + 2 * (H + 1) * dim_e
    audit = audit_trace(report, inst.space)
    assert audit.ok, audit.violations
    assert "independence" in audit.checked


def test_audit_empty_trace_passes():
    assert audit_stack([], None, 3).ok


def test_audit_flags_two_pushes_in_one_round():
    stack = UncertaintyStack()
    stack.push(UncertaintyItem(0, 0, 1, 0))
    stack.push(UncertaintyItem(0, 0, 1, 1))
    result = audit_stack(stack.events, None, 3)
    assert [v.check for v in result.violations] == ["one-push-per-round"]


def test_audit_flags_depth_and_order():
    stack = UncertaintyStack()
    for k, h in enumerate([1, 0]):
        stack.round = k
        stack.push(UncertaintyItem(0, 0, 1, h))
    checks = {v.check for v in audit_stack(stack.events, None, 1).violations}
    assert checks == {"depth", "epoch-order"}


def test_oracle_sets_shrink_monotonically():
    inst = random_stoch_instance(11)
    report = run_policy_elimination(inst.env, inst.space, RunConfig(40, 60, seed=2))
    eliminated = [(e.item.state, e.eliminated, e.item.epoch) for e in report.stack_events if e.kind == "pop"]
    pairs = list(inst.space.features)
    previous = {p: (0, 1) for p in pairs}
    z = ConstraintSet()
    for triple in eliminated:
        z.add(*triple)
        oracle = EliminationOracle(inst.space, z)
        for p in pairs:
            now = oracle(*p)
            assert set(now) <= set(previous[p])
            previous[p] = now


def test_optimal_parameter_survives_and_survivors_are_good():
    inst = random_stoch_instance(5)
    H = inst.env.horizon
    t_star, n = default_parameters(H, 2, inst.gap, inst.env.reward_bound, 0.1, 0.1)
    report = run_policy_elimination(inst.env, inst.space, RunConfig(t_star, n, seed=0))
    assert inst.theta_star in optimal_parameters(inst.space, inst.env)
    out = check_outcome(report, inst.env, inst.space, 0.1)
    assert out.optimal_survived and out.all_eps_optimal


def test_run_requires_fixed_initial_action():
    with pytest.raises(ValueError):
        run_policy_elimination(chain_sim(2, Fraction(1, 4)), Finite([{(0, 0): 0}]), RunConfig(1, 1))
