"""Adaptive binary-tree adversary for deterministic episodic learners.

States at core epoch ``h`` are ``0 .. 2**h - 1`` and action ``a`` moves ``s`` to
``2**h * a + s``. Features are released on first visit by walking one path down
a shattered tree: each new pair gets the child of the previously assigned node
on the side opposite to the action that led to it. Terminal rewards grow with
visit order, so an agent only earns the top reward after it has paid for the
earlier ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .complexity import ShatteredTree
from .det_elim import DetElimAgent
from .env import DeterministicMdp, exact_q_star, optimal_actions
from .errors import ConfigError, InvalidActionError
from .exact import as_fraction
from .policy import Gf2Linear, PolicySpace, RelabeledSpace


def transition(state: int, action: int, epoch: int) -> int:
    return (1 << epoch) * action + state


def lower_bound_value(dim_l, horizon: int, episodes: int, reward_bound) -> Fraction:
    """``Rbar / 4 * min(dim_L, 2**H, T - 1)``; ``dim_l`` may be ``math.inf``."""
    terms = [2 ** horizon, episodes - 1]
    if dim_l != math.inf:
        terms.append(int(dim_l))
    return as_fraction(reward_bound) * max(min(terms), 0) / 4


class AdversarySession:
    """One adaptive environment. Acts as a ``reset``/``step`` runner.

    ``space`` is the agent-visible class: pairs are aliases for tree-node keys
    of the base class and appear only once visited. No-op epochs (added when
    the horizon exceeds the tree) are constant-action pairs.
    """

    def __init__(self, tree: ShatteredTree, base: PolicySpace, horizon: int, reward_bound):
        if horizon < 1:
            raise ConfigError("horizon must be at least 1", "horizon")
        if tuple(base.actions) != (0, 1):
            raise ConfigError(f"binary actions (0, 1) required, got {tuple(base.actions)}", "actions")
        rbar = as_fraction(reward_bound)
        if rbar <= 0:
            raise ConfigError("reward bound must be positive", "reward_bound")
        core = min(horizon, int(math.log2(tree.depth + 1)) if tree.depth > 0 else 0)
        if core < 1:
            raise ConfigError(f"tree depth {tree.depth} too shallow for any branching epoch", "tree")
        _check_path_distinct(tree, 2 ** core - 1)

        self.tree = tree
        self.base = base
        self.horizon = horizon
        self.core = core
        self.noop = horizon - core
        self.dim = 2 ** core  # D in the reward schedule
        self.reward_bound = rbar
        self.actions = (0, 1)
        self.space = RelabeledSpace(base, constant={(0, h): 0 for h in range(self.noop)})

        self.cursor: tuple | None = None  # label prefix of the last assigned node
        self.assigned: dict = {}  # pair -> label prefix
        self.visit_order: list = []
        self.terminal_rank: dict = {}  # terminal state -> rank (1-based)
        self.episodes = 0
        self.state = None
        self.epoch = None
        self._assign((0, self.noop), None)

    # --- feature release -------------------------------------------------
    def _assign(self, pair, via_action):
        if self.cursor is None:
            prefix = ()
        else:
            prefix = self.cursor + (1 - via_action,)
        self.cursor = prefix
        self.assigned[pair] = prefix
        self.visit_order.append(pair)
        self.space.assign(pair, self.tree.node(prefix))

    def _visit(self, state, epoch, via_action):
        if epoch < self.noop or (state, epoch) in self.assigned:
            return
        self._assign((state, epoch), via_action)
        if epoch == self.horizon - 1:
            self.terminal_rank[state] = len(self.terminal_rank) + 1

    def terminal_reward(self, rank: int) -> Fraction:
        return Fraction(2 * rank, self.dim) * self.reward_bound

    # --- runner interface ------------------------------------------------
    def reset(self):
        self.state, self.epoch = 0, 0
        self.episodes += 1
        return self.state

    def step(self, action):
        if self.epoch is None or self.epoch >= self.horizon:
            raise RuntimeError("episode finished; call reset()")
        if action not in (0, 1):
            raise InvalidActionError(f"action {action!r} not in (0, 1)")
        s, h = self.state, self.epoch
        if h == self.horizon - 1:
            reward = self.terminal_reward(self.terminal_rank[s])
            nxt = None
        else:
            reward = Fraction(0)
            nxt = s if h < self.noop else transition(s, action, h - self.noop)
            self._visit(nxt, h + 1, action)
        self.state, self.epoch = nxt, h + 1
        return nxt, reward

    # --- freezing --------------------------------------------------------
    def complete(self):
        """Release every remaining pair in epoch-then-state order, as if visited."""
        for h in range(self.noop + 1, self.horizon):
            width = 1 << (h - self.noop)
            for s in range(width):
                via = (s >> (h - self.noop - 1)) & 1
                self._visit(s, h, via)

    def frozen_mdp(self) -> DeterministicMdp:
        """The environment with unvisited terminals ranked after every visited one."""
        self.complete()
        H, noop = self.horizon, self.noop
        states = sorted({s for h in range(H) for s in range(1 << max(h - noop, 0))})
        transitions, rewards = {}, {}
        for h in range(H):
            width = 1 << max(h - noop, 0)
            for s in range(width):
                for a in (0, 1):
                    if h == H - 1:
                        rewards[(s, a, h)] = self.terminal_reward(self.terminal_rank[s])
                    else:
                        transitions[(s, a, h)] = s if h < noop else transition(s, a, h - noop)
                        rewards[(s, a, h)] = Fraction(0)
        return DeterministicMdp(H, states, (0, 1), transitions, rewards, 0, self.reward_bound)

    def path_labels(self) -> tuple:
        """Labels along the assigned tree path (the cursor)."""
        return self.cursor

    def path_witness(self):
        """Stored witness for the assigned path, padded with zeros to full depth."""
        labels = self.cursor + (0,) * (self.tree.depth - len(self.cursor))
        return self.tree.witnesses.get(labels)

    def check_path_witness(self) -> bool:
        theta = self.path_witness()
        if theta is None:
            return False
        for i in range(len(self.cursor)):
            if self.base.action(theta, *self.tree.node(self.cursor[:i])) != self.cursor[i]:
                return False
        return True


def _check_path_distinct(tree: ShatteredTree, length: int):
    if tree.depth < length:
        raise ConfigError(f"tree depth {tree.depth} below the {length} levels needed", "tree")

    def walk(prefix, seen):
        if len(prefix) == length:
            return
        key = tree.node(prefix)
        if key in seen:
            raise ConfigError(f"tree node key {key!r} repeats along path {prefix}", "tree")
        seen.add(key)
        for b in (0, 1):
            walk(prefix + (b,), seen)
        seen.discard(key)

    walk((), set())


def new_session(tree: ShatteredTree, base: PolicySpace, horizon: int, reward_bound) -> AdversarySession:
    return AdversarySession(tree, base, horizon, reward_bound)


# ---------------------------------------------------------------------------
# agents

class GreedyAgent:
    """Replays the best return seen so far; untried actions are worth zero, ties go to action 0."""

    def __init__(self, horizon: int):
        self.horizon = horizon
        self.q: dict = {}

    def play_episode(self, runner):
        s = runner.reset()
        states, actions, rewards = [], [], []
        for h in range(self.horizon):
            a = max((0, 1), key=lambda b: (self.q.get((s, b, h), Fraction(0)), -b))
            states.append(s)
            actions.append(a)
            s, r = runner.step(a)
            rewards.append(r)
        for h in reversed(range(self.horizon)):
            tail = Fraction(0) if h == self.horizon - 1 else max(
                self.q.get((states[h + 1], b, h + 1), Fraction(0)) for b in (0, 1))
            key = (states[h], actions[h], h)
            self.q[key] = max(self.q.get(key, Fraction(0)), rewards[h] + tail)
        return rewards


class ScriptedAgent:
    """Cycles through fixed action sequences."""

    def __init__(self, sequences):
        self.sequences = [tuple(seq) for seq in sequences]
        if not self.sequences:
            raise ValueError("need at least one action sequence")
        self.t = 0

    def play_episode(self, runner):
        seq = self.sequences[self.t % len(self.sequences)]
        self.t += 1
        runner.reset()
        return [runner.step(a)[1] for a in seq]


class ElimAgentAdapter:
    """Deterministic elimination agent driven through the session's lazily released class."""

    def __init__(self, session: AdversarySession):
        self.inner = DetElimAgent(session.space, session.horizon)

    def play_episode(self, runner):
        return list(self.inner.play_episode(runner).rewards)


def make_agent(kind: str, session: AdversarySession, script=None):
    if kind == "greedy":
        return GreedyAgent(session.horizon)
    if kind == "det-elim":
        return ElimAgentAdapter(session)
    if kind == "scripted":
        return ScriptedAgent(script or [(0,) * session.horizon])
    raise ConfigError(f"unknown agent {kind!r}", "agent")


# ---------------------------------------------------------------------------

@dataclass
class AdversaryRecord:
    rewards: list
    v_star: Fraction
    dim: int
    episodes: int
    horizon: int
    reward_bound: Fraction
    optimal_in_class: bool
    path_witness_ok: bool
    optimal_parameter: object = None
    frozen: DeterministicMdp | None = None
    frozen_space: PolicySpace | None = None
    visit_order: list = field(default_factory=list)

    @property
    def regret(self) -> Fraction:
        return sum((self.v_star - r for r in self.rewards), Fraction(0))

    def cumulative_regret(self) -> list:
        out, acc = [], Fraction(0)
        for r in self.rewards:
            acc += self.v_star - r
            out.append(acc)
        return out

    @property
    def proof_bound(self) -> Fraction:
        """``min(D/4, T/2) * Rbar``."""
        return min(Fraction(self.dim, 4), Fraction(self.episodes, 2)) * self.reward_bound

    def lower_bound(self, dim_l=None) -> Fraction:
        return lower_bound_value(self.dim if dim_l is None else dim_l, self.horizon,
                                 self.episodes, self.reward_bound)


def play(session: AdversarySession, agent, episodes: int) -> AdversaryRecord:
    """Run ``episodes`` episodes, freeze the environment, and check the optimal policy's membership."""
    if episodes < 0:
        raise ValueError("episode count must be non-negative")
    rewards = []
    for _ in range(episodes):
        rewards.append(sum(agent.play_episode(session), Fraction(0)))
    path_ok = session.check_path_witness()
    mdp = session.frozen_mdp()
    q = exact_q_star(mdp)
    v_star = q.values[(mdp.start, 0)]
    in_class, theta = _optimal_membership(session, mdp, q)
    frozen_space = session.space
    if isinstance(session.base, Gf2Linear):
        frozen_space = session.space.as_gf2()
    return AdversaryRecord(rewards, v_star, session.dim, episodes, session.horizon, session.reward_bound,
                           in_class, path_ok, theta, mdp, frozen_space, list(session.visit_order))


def _optimal_membership(session, mdp, q):
    """Some class parameter plays an optimal action at every reachable pair with a choice."""
    best = optimal_actions(mdp, q)
    solver = session.space.solver()
    for (s, h), acts in best.items():
        if h == mdp.horizon - 1 or h < session.noop:
            continue  # action does not matter there
        for a in (0, 1):
            if a not in acts:
                solver.add(s, a, h)
    if not solver.actions(0, session.noop):
        return False, None
    theta = None
    if isinstance(session.base, Gf2Linear):
        z = [(s, a, h) for (s, h), acts in best.items()
             if session.noop <= h < mdp.horizon - 1 for a in (0, 1) if a not in acts]
        theta = session.space.as_gf2().consistent_parameter(z)
    return True, theta
