"""Finite-horizon environments, exact dynamic programming and regret accounting.

Epochs run ``0 .. H-1``. An action is taken and a reward collected at every
epoch, so a full episode has ``H`` steps. Deterministic systems and all exact
oracles use ``Fraction`` rewards; only Monte-Carlo estimates are floats.
"""

from __future__ import annotations

import bisect
import math
import random
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .errors import (
    DPLimitExceeded,
    EnvironmentContractError,
    InvalidActionError,
    OracleUnavailableError,
)
from .exact import as_fraction

State = Hashable
Action = int
DP_LIMIT = 2_000_000


class QTable(dict):
    """Sparse ``(state, action, epoch) -> value`` map; absent entries read as 0."""

    def __missing__(self, key):
        return Fraction(0)


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    actions: tuple
    rewards: tuple
    episode: int = 0

    @property
    def total(self):
        return sum(self.rewards, Fraction(0))

    def __len__(self):
        return len(self.actions)


@dataclass(frozen=True, eq=False)
class DeterministicMdp:
    """Deterministic finite-horizon system ``(F, R)`` with a fixed start state.

    ``transitions`` maps ``(s, a, h)`` to the next state and may omit epoch
    ``H-1``; ``rewards`` maps ``(s, a, h)`` to a non-negative rational and
    defaults to 0. If ``reward_bound`` is None it is set to the largest total
    reward over all action sequences.
    """

    horizon: int
    states: tuple
    actions: tuple
    transitions: Mapping
    rewards: Mapping
    start: State
    reward_bound: Fraction | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(sorted(self.actions)))
        object.__setattr__(self, "transitions", MappingProxyType(dict(self.transitions)))
        rewards = {k: as_fraction(v) for k, v in self.rewards.items()}
        for key, r in rewards.items():
            if r < 0:
                raise EnvironmentContractError(f"negative reward {r} at {key}")
        object.__setattr__(self, "rewards", MappingProxyType(rewards))
        if self.start not in set(self.states):
            raise EnvironmentContractError(f"start state {self.start!r} not in states")
        state_set = set(self.states)
        for key, nxt in self.transitions.items():
            if nxt not in state_set:
                raise EnvironmentContractError(f"transition {key} leads to unknown state {nxt!r}")
        best = max_total_reward(self)
        if self.reward_bound is None:
            object.__setattr__(self, "reward_bound", best)
        else:
            bound = as_fraction(self.reward_bound)
            object.__setattr__(self, "reward_bound", bound)
            if best > bound:
                raise EnvironmentContractError(
                    f"declared reward_bound {bound} is below the best achievable total {best}"
                )

    @classmethod
    def from_functions(cls, horizon, states, actions, transition: Callable, reward: Callable,
                       start, reward_bound=None):
        """Tabulate ``transition(s, a, h)`` and ``reward(s, a, h)`` over every triple."""
        F, R = {}, {}
        for h in range(horizon):
            for s in states:
                for a in actions:
                    if h < horizon - 1:
                        F[(s, a, h)] = transition(s, a, h)
                    r = reward(s, a, h)
                    if r:
                        R[(s, a, h)] = r
        return cls(horizon, tuple(states), tuple(actions), F, R, start, reward_bound)

    def allowed_actions(self, state, epoch) -> tuple:
        return self.actions

    def reward(self, state, action, epoch) -> Fraction:
        return self.rewards.get((state, action, epoch), Fraction(0))

    def next_state(self, state, action, epoch):
        if action not in self.actions:
            raise InvalidActionError(f"invalid action {action!r}")
        if epoch >= self.horizon - 1:
            return None
        try:
            return self.transitions[(state, action, epoch)]
        except KeyError:
            raise InvalidActionError(
                f"no transition defined for (state={state!r}, action={action!r}, epoch={epoch})"
            ) from None

    def step(self, state, action, epoch):
        nxt = self.next_state(state, action, epoch)
        return nxt, self.reward(state, action, epoch)

    def successors(self, state, action, epoch):
        """Next-state distribution as ``[(s', p)]`` (one atom here)."""
        nxt = self.next_state(state, action, epoch)
        return [] if nxt is None else [(nxt, Fraction(1))]

    def expected_reward(self, state, action, epoch) -> Fraction:
        return self.reward(state, action, epoch)

    def max_reward(self, state, action, epoch) -> Fraction:
        return self.reward(state, action, epoch)

    def runner(self) -> "DeterministicRunner":
        return DeterministicRunner(self)

    def as_stochastic(self) -> "StochasticSim":
        kernel = {k: ((v, Fraction(1)),) for k, v in self.transitions.items()}
        rewards = {k: ((v, Fraction(1)),) for k, v in self.rewards.items()}
        return StochasticSim(self.horizon, self.states, self.actions, self.start,
                             self.reward_bound, kernel=kernel, reward_dist=rewards)


class DeterministicRunner:
    """Episodic ``reset``/``step`` access to a :class:`DeterministicMdp`."""

    def __init__(self, mdp: DeterministicMdp):
        self.mdp = mdp
        self.horizon = mdp.horizon
        self.actions = mdp.actions
        self.reward_bound = mdp.reward_bound
        self.state = None
        self.epoch = None

    def reset(self):
        self.state, self.epoch = self.mdp.start, 0
        return self.state

    def step(self, action):
        if self.epoch is None or self.epoch >= self.horizon:
            raise EnvironmentContractError("step() called outside an episode")
        nxt, r = self.mdp.step(self.state, action, self.epoch)
        self.state, self.epoch = nxt, self.epoch + 1
        return nxt, r


def _normalize_dist(pairs, what) -> tuple:
    out = []
    total = Fraction(0)
    for outcome, p in pairs:
        p = as_fraction(p)
        if p < 0:
            raise EnvironmentContractError(f"negative probability in {what}")
        if p:
            out.append((outcome, p))
            total += p
    if total != 1:
        raise EnvironmentContractError(f"probabilities in {what} sum to {total}, not 1")
    return tuple(out)


@dataclass(frozen=True, eq=False)
class StochasticSim:
    """Stochastic finite-horizon MDP accessed through a simulator oracle.

    With ``kernel``/``reward_dist`` given (finite supports, exact probabilities)
    the environment is *explicit* and supports exact DP. Otherwise ``sampler(s, a,
    h, rng) -> (next_state, reward)`` must be given and only sampling works.
    ``initial_action``, if set, is the single action available at ``(start, 0)``.
    """

    horizon: int
    states: tuple
    actions: tuple
    start: State
    reward_bound: Fraction
    kernel: Mapping | None = None
    reward_dist: Mapping | None = None
    initial_action: Action | None = None
    sampler: Callable | None = None
    _tables: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(sorted(self.actions)))
        object.__setattr__(self, "reward_bound", as_fraction(self.reward_bound))
        if self.kernel is None and self.sampler is None:
            raise ValueError("need either an explicit kernel or a sampler")
        if self.kernel is not None:
            state_set = set(self.states)
            kernel = {}
            for key, dist in self.kernel.items():
                d = _normalize_dist(dist, f"transition {key}")
                for s2, _ in d:
                    if s2 not in state_set:
                        raise EnvironmentContractError(f"transition {key} leads to unknown state {s2!r}")
                kernel[key] = d
            object.__setattr__(self, "kernel", MappingProxyType(kernel))
            rdist = {}
            for key, dist in (self.reward_dist or {}).items():
                d = _normalize_dist(((as_fraction(r), p) for r, p in dist), f"reward {key}")
                if any(r < 0 for r, _ in d):
                    raise EnvironmentContractError(f"negative reward at {key}")
                rdist[key] = d
            object.__setattr__(self, "reward_dist", MappingProxyType(rdist))
            best = max_total_reward(self)
            if best > self.reward_bound:
                raise EnvironmentContractError(
                    f"declared reward_bound {self.reward_bound} is below the essential sup {best}"
                )
            for key in kernel:
                self._tables[("k",) + key] = _cdf(kernel[key])
            for key in rdist:
                self._tables[("r",) + key] = _cdf(rdist[key])

    @property
    def explicit(self) -> bool:
        return self.kernel is not None

    def allowed_actions(self, state, epoch) -> tuple:
        if epoch == 0 and state == self.start and self.initial_action is not None:
            return (self.initial_action,)
        return self.actions

    def successors(self, state, action, epoch):
        self._require_explicit()
        if epoch >= self.horizon - 1:
            return []
        try:
            return list(self.kernel[(state, action, epoch)])
        except KeyError:
            raise InvalidActionError(
                f"no transition defined for (state={state!r}, action={action!r}, epoch={epoch})"
            ) from None

    def expected_reward(self, state, action, epoch) -> Fraction:
        self._require_explicit()
        dist = self.reward_dist.get((state, action, epoch))
        if dist is None:
            return Fraction(0)
        return sum((r * p for r, p in dist), Fraction(0))

    def max_reward(self, state, action, epoch) -> Fraction:
        self._require_explicit()
        dist = self.reward_dist.get((state, action, epoch))
        return max((r for r, _ in dist), default=Fraction(0)) if dist else Fraction(0)

    def _require_explicit(self):
        if not self.explicit:
            raise OracleUnavailableError("simulator-only environment has no explicit kernel")

    def session(self, seed) -> "SimSession":
        return SimSession(self, seed)


def _cdf(dist):
    outcomes = [o for o, _ in dist]
    acc, cum = Fraction(0), []
    for _, p in dist:
        acc += p
        cum.append(float(acc))
    cum[-1] = 1.0
    return outcomes, cum


class SimSession:
    """One seeded simulator stream: ``reset_to(s, h)`` then ``step(a)`` repeatedly.

    Each explicit-kernel step consumes exactly two uniforms (next state, reward),
    so identical seeds and identical action sequences give identical samples.
    """

    def __init__(self, sim: StochasticSim, seed):
        self.sim = sim
        self.rng = random.Random(seed)
        self.state = None
        self.epoch = None
        self.total = Fraction(0)
        self.steps = 0

    def reset_to(self, state, epoch):
        if not 0 <= epoch < self.sim.horizon:
            raise ValueError(f"epoch {epoch} outside [0, {self.sim.horizon})")
        self.state, self.epoch = state, epoch
        self.total = Fraction(0)
        return state

    def step(self, action):
        sim = self.sim
        s, h = self.state, self.epoch
        if h is None or h >= sim.horizon:
            raise EnvironmentContractError("step() called outside an episode")
        if action not in sim.allowed_actions(s, h):
            raise InvalidActionError(f"action {action!r} not available at ({s!r}, {h})")
        self.steps += 1
        if sim.explicit:
            u_next, u_rew = self.rng.random(), self.rng.random()
            if h < sim.horizon - 1:
                table = sim._tables.get(("k", s, action, h))
                if table is None:
                    raise InvalidActionError(f"no transition defined for ({s!r}, {action!r}, {h})")
                nxt = table[0][bisect.bisect_right(table[1], u_next)]
            else:
                nxt = None
            table = sim._tables.get(("r", s, action, h))
            r = table[0][bisect.bisect_right(table[1], u_rew)] if table else Fraction(0)
            self.total += r
            if self.total > sim.reward_bound:
                raise EnvironmentContractError(
                    f"episode reward {self.total} exceeds reward_bound {sim.reward_bound}"
                )
            reward = float(r)
        else:
            nxt, reward = sim.sampler(s, action, h, self.rng)
            if h >= sim.horizon - 1:
                nxt = None
            self.total += as_fraction(reward)
            if self.total > sim.reward_bound:
                raise EnvironmentContractError(
                    f"episode reward {float(self.total)} exceeds reward_bound {sim.reward_bound}"
                )
        self.state, self.epoch = nxt, h + 1
        return nxt, reward


# ---------------------------------------------------------------------------
# exact oracles

def reachable(env) -> dict[int, set]:
    """States reachable at each epoch from the start state, under any actions."""
    layers = {0: {env.start}}
    for h in range(env.horizon - 1):
        nxt = set()
        for s in layers[h]:
            for a in env.allowed_actions(s, h):
                nxt.update(s2 for s2, _ in env.successors(s, a, h))
        layers[h + 1] = nxt
    return layers


def max_total_reward(env) -> Fraction:
    """Essential supremum of the episode reward over all policies."""
    layers = reachable(env)
    best_next: dict = {}
    for h in reversed(range(env.horizon)):
        cur = {}
        for s in layers[h]:
            cur[s] = max(
                env.max_reward(s, a, h)
                + max((best_next[s2] for s2, _ in env.successors(s, a, h)), default=Fraction(0))
                for a in env.allowed_actions(s, h)
            )
        best_next = cur
    return best_next[env.start]


def _check_dp_limit(env, limit):
    size = len(env.states) * len(env.actions) * env.horizon
    if size > limit:
        raise DPLimitExceeded(f"|S||A|H = {size} exceeds the DP limit {limit}")


def exact_q_star(env, limit: int = DP_LIMIT) -> QTable:
    """Optimal Q-function by backward induction over reachable ``(s, h)``."""
    if isinstance(env, StochasticSim):
        env._require_explicit()
    _check_dp_limit(env, limit)
    layers = reachable(env)
    q = QTable()
    v_next: dict = {}
    for h in reversed(range(env.horizon)):
        v_cur = {}
        for s in layers[h]:
            best = None
            for a in env.allowed_actions(s, h):
                value = env.expected_reward(s, a, h) + sum(
                    (p * v_next[s2] for s2, p in env.successors(s, a, h)), Fraction(0)
                )
                q[(s, a, h)] = value
                best = value if best is None else max(best, value)
            v_cur[s] = best
        v_next = v_cur
    q.values = {}  # filled below for convenience
    for h, layer in layers.items():
        for s in layer:
            q.values[(s, h)] = max(q[(s, a, h)] for a in env.allowed_actions(s, h))
    return q


def optimal_value(env, q: QTable | None = None) -> Fraction:
    q = exact_q_star(env) if q is None else q
    return q.values[(env.start, 0)]


def optimal_actions(env, q: QTable | None = None) -> dict:
    """``(s, h) -> tuple`` of all Q*-maximizing actions at every reachable pair."""
    q = exact_q_star(env) if q is None else q
    out = {}
    for (s, h), v in q.values.items():
        out[(s, h)] = tuple(a for a in env.allowed_actions(s, h) if q[(s, a, h)] == v)
    return out


def policy_value(env, policy: Callable, limit: int = DP_LIMIT) -> Fraction:
    """Exact ``V^policy(start, 0)`` by forward propagation of the state distribution.

    At a pair with a single allowed action (the forced initial action) that
    action is used whatever the policy says.
    """
    if isinstance(env, StochasticSim):
        env._require_explicit()
    _check_dp_limit(env, limit)
    dist = {env.start: Fraction(1)}
    total = Fraction(0)
    for h in range(env.horizon):
        nxt: dict = {}
        for s, p in dist.items():
            allowed = env.allowed_actions(s, h)
            a = allowed[0] if len(allowed) == 1 else policy(s, h)
            if a not in allowed:
                raise InvalidActionError(f"policy chose unavailable action {a!r} at ({s!r}, {h})")
            total += p * env.expected_reward(s, a, h)
            for s2, p2 in env.successors(s, a, h):
                nxt[s2] = nxt.get(s2, Fraction(0)) + p * p2
        dist = nxt
    return total


def rollout(mdp: DeterministicMdp, actions: Sequence, episode: int = 0) -> Trajectory:
    if len(actions) != mdp.horizon:
        raise ValueError(f"expected {mdp.horizon} actions, got {len(actions)}")
    s = mdp.start
    states, rewards = [], []
    for h, a in enumerate(actions):
        states.append(s)
        s, r = mdp.step(s, a, h)
        rewards.append(r)
    return Trajectory(tuple(states), tuple(actions), tuple(rewards), episode)


def q_gap(env, space, q: QTable | None = None):
    """Smallest Q*-advantage of the optimal action over any other class action.

    Returns ``math.inf`` when no reachable pair offers the class a second
    action. Raises AssumptionViolation if the class cannot realize the optimal
    action, or realizes two optimal actions, at some reachable pair.
    """
    from .errors import AssumptionViolation
    from .policy import ConstraintSet, elimination_oracle

    q = exact_q_star(env) if q is None else q
    empty = ConstraintSet()
    gap = math.inf
    for (s, h), v in q.values.items():
        allowed = env.allowed_actions(s, h)
        if len(allowed) < 2:
            continue
        realizable = [a for a in elimination_oracle(space, empty, s, h) if a in allowed]
        best = [a for a in realizable if q[(s, a, h)] == v]
        if len(best) > 1:
            raise AssumptionViolation(f"optimal action not unique at ({s!r}, {h}): {best}")
        if not best:
            raise AssumptionViolation(f"class cannot take the optimal action at ({s!r}, {h})")
        for a in realizable:
            if a != best[0]:
                gap = min(gap, v - q[(s, a, h)])
    return gap


def augment_initial(env, p0: Mapping, initial_action: Action = 0, start=None) -> StochasticSim:
    """Prepend a fixed start state whose single action draws the original start from ``p0``.

    The result has horizon ``H + 1`` and every original triple ``(s, a, h)``
    moves to epoch ``h + 1``.
    """
    if isinstance(env, DeterministicMdp):
        env = env.as_stochastic()
    env._require_explicit()
    dist = _normalize_dist(p0.items(), "initial distribution")
    if any(s not in set(env.states) for s, _ in dist):
        raise EnvironmentContractError("initial distribution supported outside the state set")
    if start is None:
        start = max(env.states) + 1 if all(isinstance(s, int) for s in env.states) else "__start__"
    if start in set(env.states):
        raise ValueError(f"new start state {start!r} collides with an existing state")
    actions = tuple(sorted(set(env.actions) | {initial_action}))
    kernel = {(start, initial_action, 0): dist} if env.horizon >= 1 else {}
    for (s, a, h), d in env.kernel.items():
        kernel[(s, a, h + 1)] = d
    # the original last epoch has no outgoing transition; epoch 0 -> 1 does
    rewards = {(s, a, h + 1): d for (s, a, h), d in env.reward_dist.items()}
    return StochasticSim(env.horizon + 1, env.states + (start,), actions, start, env.reward_bound,
                         kernel=kernel, reward_dist=rewards, initial_action=initial_action)


def regret(episode_rewards: Iterable, env, q: QTable | None = None):
    """Cumulative shortfall ``sum_t (V*(s0, 0) - reward_t)``."""
    v_star = optimal_value(env, q)
    total = Fraction(0) if isinstance(v_star, Fraction) else 0.0
    for t, r in enumerate(episode_rewards):
        r = as_fraction(r)
        if r > env.reward_bound:
            raise EnvironmentContractError(
                f"episode {t} earned {r}, above reward_bound {env.reward_bound}"
            )
        total += v_star - r
    if total < 0:
        warnings.warn(f"negative regret {total}: episodes beat V*", RuntimeWarning, stacklevel=2)
    return total
