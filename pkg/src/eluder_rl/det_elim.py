"""Policy elimination for deterministic systems: no simulator, paths are replayed instead.

Rewards and ``Q`` estimates are exact rationals here, so the estimates along an
uncertainty-free continuation equal the true optimal values exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .env import DeterministicMdp, QTable, exact_q_star, optimal_actions
from .errors import EnvironmentContractError
from .policy import ConstraintSet, EliminationOracle, PolicySpace, UncertaintyItem
from .stack import AuditResult, UncertaintyStack, audit_stack


class PathBook:
    """First action sequence seen to reach each ``(state, epoch)``; later paths never overwrite."""

    def __init__(self):
        self._paths: dict = {}

    def record(self, state, epoch, actions) -> None:
        self._paths.setdefault((state, epoch), tuple(actions))

    def path(self, state, epoch) -> tuple:
        try:
            return self._paths[(state, epoch)]
        except KeyError:
            raise KeyError(f"no recorded path to ({state!r}, {epoch})") from None

    def __contains__(self, pair):
        return pair in self._paths

    def __len__(self):
        return len(self._paths)

    def items(self):
        return self._paths.items()

    def verify(self, mdp: DeterministicMdp) -> bool:
        for (state, epoch), actions in self._paths.items():
            s = mdp.start
            for h, a in enumerate(actions):
                s = mdp.next_state(s, a, h)
            if s != state:
                return False
        return True


@dataclass
class EpisodeRecord:
    episode: int
    event: str  # "push", "pop", "pop+push", "clean"
    states: tuple
    actions: tuple
    rewards: tuple
    stack_depth: int
    z_size: int
    start_epoch: int = 0
    # (kind, (s, a, h), Q-hat at the end of the episode) for the exactness audit
    q_checks: list = field(default_factory=list)

    @property
    def reward(self) -> Fraction:
        return sum(self.rewards, Fraction(0))


@dataclass
class DetRunReport:
    episodes: list
    constraints: ConstraintSet
    q: QTable
    stack_events: list
    final_stack: list
    pathbook: PathBook
    horizon: int
    oracle_calls: int = 0
    max_constraints: int = 0
    v_star: Fraction | None = None

    @property
    def rewards(self) -> list:
        return [e.reward for e in self.episodes]

    @property
    def events(self) -> list[str]:
        return [e.event for e in self.episodes]

    def regret(self) -> Fraction:
        if self.v_star is None:
            raise ValueError("optimal value unknown for this run")
        return sum((self.v_star - r for r in self.rewards), Fraction(0))

    def cumulative_regret(self) -> list:
        out, acc = [], Fraction(0)
        for r in self.rewards:
            acc += self.v_star - r
            out.append(acc)
        return out

    def stack_episodes(self) -> int:
        return sum(e.event != "clean" for e in self.episodes)


def _argmax(actions, q, state, epoch):
    best, best_v = None, None
    for a in actions:
        v = q[(state, a, epoch)]
        if best is None or v > best_v:
            best, best_v = a, v
    return best


@dataclass(frozen=True)
class Pushed:
    item: UncertaintyItem


@dataclass(frozen=True)
class Clean:
    pass


def explore_deterministic(runner, start, oracle, q: QTable, stack: UncertaintyStack,
                          pathbook: PathBook, prefix=None):
    """Greedy walk from ``start = (s, h0)`` to the end of the episode, then backups.

    ``prefix`` is ``(states, actions, rewards)`` already executed this episode
    (the replayed path plus the forced action), so the backward update and the
    path book cover the whole episode. Returns ``(outcome, states, actions, rewards)``.
    """
    states, actions, rewards = ([], [], []) if prefix is None else (list(p) for p in prefix)
    state, h0 = start
    horizon = runner.horizon
    options_at = {}
    for h in range(h0, horizon):
        options = oracle(state, h)
        options_at[h] = options
        a = options[0] if len(options) == 1 else _argmax(options, q, state, h)
        states.append(state)
        actions.append(a)
        nxt, r = runner.step(a)
        rewards.append(r)
        state = nxt

    outcome = Clean()
    uncertain = [h for h in range(h0, horizon) if len(options_at[h]) > 1]
    if uncertain:
        h = uncertain[-1]
        a1 = actions[h]
        a2 = next(b for b in options_at[h] if b != a1)
        item = UncertaintyItem(states[h], a1, a2, h)
        stack.push(item, options_at[h])
        outcome = Pushed(item)

    _backup(states, actions, rewards, oracle, q, horizon)
    for h, s in enumerate(states):
        pathbook.record(s, h, actions[:h])
    return outcome, states, actions, rewards


class DetElimAgent:
    """Episodic learner for deterministic systems; drives any ``reset``/``step`` runner.

    ``space`` may grow its feature table between episodes (the adaptive
    adversary releases features lazily); the oracle only queries pairs that
    have been visited.
    """

    def __init__(self, space: PolicySpace, horizon: int):
        self.space = space
        self.horizon = horizon
        self.constraints = ConstraintSet()
        self.oracle = EliminationOracle(space, self.constraints)
        self.q = QTable()
        self.stack = UncertaintyStack()
        self.pathbook = PathBook()
        self.episode = 0

    def play_episode(self, runner) -> EpisodeRecord:
        k = self.episode
        self.episode += 1
        self.stack.round = k
        oracle, q, stack = self.oracle, self.q, self.stack
        pushes_before = len(stack.events)

        s = runner.reset()
        if not stack:
            outcome, states, actions, rewards = explore_deterministic(
                runner, (s, 0), oracle, q, stack, self.pathbook)
            event = "push" if isinstance(outcome, Pushed) else "clean"
            start_epoch = 0
        else:
            top = stack.top
            path = self.pathbook.path(top.state, top.epoch)
            states, rewards = [], []
            for h, a in enumerate(path):
                states.append(s)
                s, r = runner.step(a)
                rewards.append(r)
            if s != top.state:
                raise EnvironmentContractError(
                    f"replay reached {s!r} at epoch {top.epoch}, expected {top.state!r}")
            states.append(s)
            actions = list(path) + [top.a2]
            s, r = runner.step(top.a2)
            rewards.append(r)
            start_epoch = top.epoch + 1
            if start_epoch < self.horizon:
                outcome, states, actions, rewards = explore_deterministic(
                    runner, (s, start_epoch), oracle, q, stack, self.pathbook,
                    prefix=(states, actions, rewards))
            else:
                outcome = Clean()
                _backup(states, actions, rewards, oracle, q, self.horizon)
                for h, st in enumerate(states):
                    self.pathbook.record(st, h, actions[:h])
            if isinstance(outcome, Pushed):
                event = "push"
            else:
                q1 = q[(top.state, top.a1, top.epoch)]
                q2 = q[(top.state, top.a2, top.epoch)]
                keep, drop = (top.a1, top.a2) if (q1 > q2 or (q1 == q2 and top.a1 < top.a2)) \
                    else (top.a2, top.a1)
                stack.pop(eliminated=drop)
                self.constraints.add(top.state, drop, top.epoch)
                event = "pop"
                rest = [b for b in oracle(top.state, top.epoch) if b != keep]
                if rest:
                    stack.push(UncertaintyItem(top.state, keep, rest[0], top.epoch),
                               oracle(top.state, top.epoch))
                    event = "pop+push"

        checks = []
        for e in stack.events[pushes_before:]:
            it = e.item
            if e.kind == "push":
                checks.append(("push", (it.state, it.a1, it.epoch), q[(it.state, it.a1, it.epoch)]))
            else:
                checks.append(("pop", (it.state, it.a2, it.epoch), q[(it.state, it.a2, it.epoch)]))
        return EpisodeRecord(k, event, tuple(states), tuple(actions), tuple(rewards),
                             len(stack), len(self.constraints), start_epoch, checks)


def _backup(states, actions, rewards, oracle, q, horizon):
    """Exact backward update along one full episode path."""
    for h in reversed(range(horizon)):
        if h == horizon - 1:
            q[(states[h], actions[h], h)] = rewards[h]
        else:
            s_next = states[h + 1]
            q[(states[h], actions[h], h)] = rewards[h] + max(
                q[(s_next, b, h + 1)] for b in oracle(s_next, h + 1))


def run_deterministic_elimination(mdp: DeterministicMdp, space: PolicySpace, episodes: int,
                                  on_episode: Callable | None = None,
                                  compute_regret: bool = True) -> DetRunReport:
    if episodes < 0:
        raise ValueError("episode count must be non-negative")
    agent = DetElimAgent(space, mdp.horizon)
    runner = mdp.runner()
    records = []
    for _ in range(episodes):
        rec = agent.play_episode(runner)
        records.append(rec)
        if on_episode is not None:
            on_episode(rec)
    v_star = exact_q_star(mdp).values[(mdp.start, 0)] if compute_regret else None
    return DetRunReport(records, agent.constraints, agent.q, agent.stack.events, agent.stack.items,
                        agent.pathbook, mdp.horizon, agent.oracle.calls,
                        agent.oracle.max_constraints, v_star)


def det_regret_bound(reward_bound, horizon: int, dim_e: int) -> Fraction:
    """Regret cap ``2 Rbar (H + 1) dim_E + 3 Rbar H`` for the deterministic learner."""
    rb = Fraction(reward_bound)
    return 2 * rb * (horizon + 1) * dim_e + 3 * rb * horizon


def stack_episode_bound(horizon: int, dim_e: int) -> int:
    """Most episodes that can push or pop: ``3H + 2(H + 1) dim_E``."""
    return 3 * horizon + 2 * (horizon + 1) * dim_e


def audit_deterministic(report: DetRunReport, space: PolicySpace, mdp: DeterministicMdp) -> AuditResult:
    """Exact checks on a finished run against dynamic programming on ``mdp``.

    trichotomy: every episode pushes, pops, or plays an optimal action at every epoch;
    optimal-safe: some parameter playing optimally on every reachable pair avoids Z;
    q-exact: recorded estimates at pushes/pops equal Q*;
    clean-optimal: episodes without stack operations earn V*;
    plus the structural stack checks.
    """
    result = audit_stack(report.stack_events, space, mdp.horizon)
    result.checked += ["trichotomy", "optimal-safe", "q-exact", "clean-optimal"]
    q_star = exact_q_star(mdp)
    best = optimal_actions(mdp, q_star)
    v_star = q_star.values[(mdp.start, 0)]

    for rec in report.episodes:
        if rec.event == "clean":
            off = [h for h, (s, a) in enumerate(zip(rec.states, rec.actions)) if a not in best[(s, h)]]
            if off:
                result.fail("trichotomy", rec.episode,
                            f"no stack operation but non-optimal action at epochs {off}")
            if rec.reward != v_star:
                result.fail("clean-optimal", rec.episode, f"earned {rec.reward}, V* = {v_star}")
        for kind, (s, a, h), value in rec.q_checks:
            if value != q_star[(s, a, h)]:
                result.fail("q-exact", rec.episode,
                            f"{kind} at {(s, a, h)}: estimate {value} != Q* {q_star[(s, a, h)]}")

    # some optimal parameter must survive every prefix of Z
    solver = space.solver()
    for (s, h), acts in best.items():
        for a in space.actions:
            if a not in acts:
                solver.add(s, a, h)
    probe = (mdp.start, 0)
    if not solver.actions(*probe):
        result.fail("optimal-safe", 0, "no class member plays optimally on every reachable pair")
        return result
    z_round = _constraint_rounds(report)
    for i, (s, a, h) in enumerate(report.constraints):
        solver.add(s, a, h)
        if not solver.actions(*probe):
            result.fail("optimal-safe", z_round.get(i, -1),
                        f"constraint {(s, a, h)} removes every optimal parameter")
            break
    return result


def _constraint_rounds(report) -> dict:
    out, i = {}, 0
    for e in report.stack_events:
        if e.kind == "pop":
            out[i] = e.round
            i += 1
    return out
