import itertools
import math
import random
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from eluder_rl.env import (DeterministicMdp, StochasticSim, augment_initial, exact_q_star, max_total_reward,
                           optimal_value, policy_value, q_gap, regret, rollout)
from eluder_rl.errors import (AssumptionViolation, DPLimitExceeded, EnvironmentContractError,
                              InvalidActionError, OracleUnavailableError)
from eluder_rl.instances import random_det_instance, random_stoch_instance
from eluder_rl.policy import Finite, Gf2Linear, TabularAll

from conftest import bandit, binary_tree_mdp


def test_rollout_zero_rewards():
    mdp = binary_tree_mdp(3, lambda s: 0)
    for seq in itertools.product((0, 1), repeat=3):
        assert rollout(mdp, seq).total == 0


def test_rollout_single_step():
    mdp = bandit(0, Fraction(7, 10))
    assert rollout(mdp, [1]).total == Fraction(7, 10)


def test_rollout_binary_tree_reaches_terminal_reward():
    mdp = binary_tree_mdp(3, lambda s: Fraction(s + 1, 8))
    for a0, a1, a2 in itertools.product((0, 1), repeat=3):
        terminal = a0 + 2 * a1
        assert rollout(mdp, [a0, a1, a2]).total == Fraction(terminal + 1, 8)


def test_rollout_rejects_bad_sequences():
    mdp = bandit(0, 1)
    with pytest.raises(ValueError):
        rollout(mdp, [0, 1])
    with pytest.raises(InvalidActionError):
        rollout(mdp, [2])


def test_q_star_zero_and_one_step():
    q = exact_q_star(binary_tree_mdp(3, lambda s: 0))
    assert all(v == 0 for v in q.values.values())
    q = exact_q_star(bandit(Fraction(3, 10), Fraction(7, 10)))
    assert q[(0, 0, 0)] == Fraction(3, 10) and q[(0, 1, 0)] == Fraction(7, 10)
    assert q.values[(0, 0)] == Fraction(7, 10)


def test_q_star_bellman_identity():
    inst = random_det_instance(3)
    mdp = inst.env
    q = exact_q_star(mdp)
    for (s, a, h), v in q.items():
        tail = 0 if h == mdp.horizon - 1 else q.values[(mdp.next_state(s, a, h), h + 1)]
        assert v == mdp.reward(s, a, h) + tail


def test_q_star_limits():
    with pytest.raises(DPLimitExceeded):
        exact_q_star(binary_tree_mdp(3, lambda s: 0), limit=4)
    sampler_only = StochasticSim(2, [0], (0,), 0, 1, sampler=lambda s, a, h, rng: (0, 0.0))
    with pytest.raises(OracleUnavailableError):
        exact_q_star(sampler_only)


def test_reward_bound_defaults_and_checks():
    mdp = binary_tree_mdp(2, lambda s: Fraction(s, 2))
    assert mdp.reward_bound == Fraction(1, 2)
    with pytest.raises(EnvironmentContractError):
        DeterministicMdp(1, [0], (0,), {}, {(0, 0, 0): Fraction(1)}, 0, reward_bound=Fraction(1, 2))
    with pytest.raises(EnvironmentContractError):
        DeterministicMdp(1, [0], (0,), {}, {(0, 0, 0): Fraction(-1)}, 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_random_rollouts_stay_within_bound(seed):
    mdp = random_det_instance(seed).env
    rng = random.Random(seed)
    for _ in range(200):
        seq = [rng.randrange(2) for _ in range(mdp.horizon)]
        assert rollout(mdp, seq).total <= mdp.reward_bound


def test_stochastic_samples_within_bound():
    sim = random_stoch_instance(1).env
    session = sim.session(7)
    for _ in range(10_000 // sim.horizon):
        session.reset_to(sim.start, 0)
        total = 0.0
        for h in range(sim.horizon):
            _, r = session.step(sim.allowed_actions(session.state, h)[-1])
            total += r
        assert total <= float(sim.reward_bound) + 1e-12


def test_reproducible_sessions():
    sim = random_stoch_instance(2).env

    def trace(seed):
        session = sim.session(seed)
        out = []
        for k in range(300):
            session.reset_to(sim.start, 0)
            for h in range(sim.horizon):
                acts = sim.allowed_actions(session.state, h)
                out.append(session.step(acts[k % len(acts)]))
        return out

    assert trace(11) == trace(11)
    assert trace(11) != trace(12)


def test_session_rejects_unavailable_action():
    sim = random_stoch_instance(0).env
    session = sim.session(0)
    session.reset_to(sim.start, 0)
    with pytest.raises(InvalidActionError):
        session.step(1)  # only the fixed initial action exists at the start


def test_q_gap_examples(bandit_37):
    both = Gf2Linear(1, {(0, 0): 1})
    assert q_gap(bandit_37, both) == Fraction(2, 5)
    always_best = Finite([{(0, 0): 1}])
    assert q_gap(bandit_37, always_best) == math.inf
    always_worst = Finite([{(0, 0): 0}])
    with pytest.raises(AssumptionViolation):
        q_gap(bandit_37, always_worst)
    with pytest.raises(AssumptionViolation):
        q_gap(bandit(1, 1), both)


def test_q_gap_matches_brute_force_differencing():
    rng = random.Random(5)
    H, S = 3, 5
    transitions, rewards = {}, {}
    for h in range(H):
        for s in range(S):
            for a in (0, 1):
                rewards[(s, a, h)] = Fraction(rng.randint(0, 20), 20)
                if h < H - 1:
                    transitions[(s, a, h)] = rng.randrange(S)
    mdp = DeterministicMdp(H, list(range(S)), (0, 1), transitions, rewards, 0)
    space = TabularAll.over(range(S), (0, 1), H)

    def best_total(s, h):
        if h == H:
            return Fraction(0)
        return max(rewards[(s, a, h)] + (best_total(transitions[(s, a, h)], h + 1) if h < H - 1 else 0)
                   for a in (0, 1))

    reach = {0: {0}}
    for h in range(H - 1):
        reach[h + 1] = {transitions[(s, a, h)] for s in reach[h] for a in (0, 1)}
    expected = math.inf
    for h, layer in reach.items():
        for s in layer:
            qs = [rewards[(s, a, h)] + (best_total(transitions[(s, a, h)], h + 1) if h < H - 1 else 0)
                  for a in (0, 1)]
            if qs[0] == qs[1]:
                pytest.skip("tie in this random draw")
            expected = min(expected, abs(qs[0] - qs[1]))
    assert q_gap(mdp, space) == expected


def test_augment_initial_atomic_and_value():
    mdp = binary_tree_mdp(2, lambda s: Fraction(s + 1, 4))
    aug = augment_initial(mdp, {0: 1})
    assert aug.horizon == 3
    assert aug.allowed_actions(aug.start, 0) == (0,)
    assert aug.successors(aug.start, 0, 0) == [(0, 1)]
    assert optimal_value(aug) == optimal_value(mdp)


def test_augment_initial_rejects_non_distribution():
    mdp = random_det_instance(9, horizon=3).env
    with pytest.raises(EnvironmentContractError):
        augment_initial(mdp, {0: Fraction(1, 2)})
    with pytest.raises(EnvironmentContractError):
        augment_initial(mdp, {0: Fraction(3, 2), 1: Fraction(-1, 2)})


def test_augment_initial_uniform_frequency():
    base = StochasticSim(1, [0, 1], (0,), 0, 1, kernel={}, reward_dist={(0, 0, 0): ((1, 1),)})
    aug = augment_initial(base, {0: Fraction(1, 2), 1: Fraction(1, 2)})
    session = aug.session(123)
    hits = 0
    for _ in range(10_000):
        session.reset_to(aug.start, 0)
        s, _ = session.step(0)
        hits += s == 0
    assert abs(hits / 10_000 - 0.5) <= 0.02


def test_augment_preserves_expected_value():
    kernel = {(0, a, 0): ((1, Fraction(1, 2)), (2, Fraction(1, 2))) for a in (0, 1)}
    kernel.update({(3, a, 0): ((2, 1),) for a in (0, 1)})
    rewards = {(s, a, 1): ((Fraction(s * (a + 1), 8), 1),) for s in (1, 2) for a in (0, 1)}
    base = StochasticSim(2, [0, 1, 2, 3], (0, 1), 0, 1, kernel=kernel, reward_dist=rewards)
    p0 = {0: Fraction(1, 4), 3: Fraction(3, 4)}
    aug = augment_initial(base, p0)
    v0 = optimal_value(base)
    other = StochasticSim(2, [0, 1, 2, 3], (0, 1), 3, 1, kernel=kernel, reward_dist=rewards)
    assert optimal_value(aug) == Fraction(1, 4) * v0 + Fraction(3, 4) * optimal_value(other)


def test_regret_examples(bandit_37):
    v = Fraction(7, 10)
    assert regret([v] * 5, bandit_37) == 0
    assert regret([v - Fraction(1, 2), v, v], bandit_37) == Fraction(1, 2)
    with pytest.raises(EnvironmentContractError):
        regret([Fraction(2)], bandit_37)


def test_regret_flags_negative_without_clamping():
    mdp = DeterministicMdp(1, [0], (0,), {}, {(0, 0, 0): Fraction(1, 2)}, 0, reward_bound=1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert regret([Fraction(1)], mdp) == Fraction(-1, 2)
    assert caught


def test_policy_value_matches_rollout():
    inst = random_det_instance(12)
    mdp, space = inst.env, inst.space
    assert policy_value(mdp, space.policy(inst.theta_star)) == optimal_value(mdp)
    assert max_total_reward(mdp) == mdp.reward_bound
