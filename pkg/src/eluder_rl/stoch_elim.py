"""Stack-based policy elimination with a simulator that can restart at any (state, epoch)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .env import QTable, StochasticSim, exact_q_star, optimal_actions, policy_value
from .errors import NotEnumerableError
from .exact import as_fraction
from .policy import ConstraintSet, EliminationOracle, PolicySpace, UncertaintyItem
from .stack import AuditResult, UncertaintyStack, audit_stack


def default_parameters(horizon: int, dim_e: int, gap, reward_bound, epsilon, delta) -> tuple[int, int]:
    """Round budget ``T* = 6H + 4(H+1) dim_E`` and paths per call
    ``N = ceil(8 Rbar^2 / gap^2 * ln(4 T* / delta) + 8 Rbar / epsilon)``.
    """
    for name, v in (("gap", gap), ("reward_bound", reward_bound), ("epsilon", epsilon), ("delta", delta)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if horizon < 1 or dim_e < 0:
        raise ValueError("horizon must be >= 1 and dim_e >= 0")
    t_star = 6 * horizon + 4 * (horizon + 1) * dim_e
    gap, rbar, epsilon, delta = (float(x) for x in (gap, reward_bound, epsilon, delta))
    n = math.ceil(8 * rbar ** 2 / gap ** 2 * math.log(4 * t_star / delta) + 8 * rbar / epsilon)
    return t_star, n


@dataclass
class RunConfig:
    t_star: int
    n_paths: int
    delta: float = 0.1
    epsilon: float = 0.1
    gap: float = 0.5
    reward_bound: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.t_star < 1 or self.n_paths < 1:
            raise ValueError("t_star and n_paths must be at least 1")
        for name in ("delta", "epsilon", "gap", "reward_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_theory(cls, horizon, dim_e, gap, reward_bound, epsilon, delta, seed=0):
        t_star, n = default_parameters(horizon, dim_e, gap, reward_bound, epsilon, delta)
        return cls(t_star, n, delta, epsilon, float(gap), float(reward_bound), seed)


@dataclass(frozen=True)
class Pushed:
    item: UncertaintyItem


@dataclass(frozen=True)
class QUpdated:
    value: float


@dataclass
class RoundRecord:
    round: int
    event: str  # "push", "pop", "clean"
    stack_depth: int
    z_size: int
    reward: object = None


@dataclass
class RunReport:
    constraints: ConstraintSet
    q: QTable
    rounds: list
    stack_events: list
    final_stack: list
    horizon: int
    oracle_calls: int = 0
    max_constraints: int = 0
    certificates: dict = field(default_factory=dict)
    config: object = None
    samples: int = 0

    @property
    def events(self) -> list[str]:
        return [r.event for r in self.rounds]

    def stack_rounds(self) -> int:
        return sum(r.event in ("push", "pop") for r in self.rounds)

    def survivors(self, space: PolicySpace) -> list:
        return [t for t in space.members() if space.avoids(t, self.constraints)]


def _argmax(actions, q, state, epoch):
    best, best_v = None, None
    for a in actions:  # ascending, so ties keep the lowest id
        v = q[(state, a, epoch)]
        if best is None or v > best_v:
            best, best_v = a, v
    return best


def explore_stochastic(sim: StochasticSim, start, a0, oracle, q: QTable, n_paths: int,
                       stack: UncertaintyStack, session):
    """Up to ``n_paths`` simulated paths from ``start = (s, h0)``, taking ``a0`` first.

    ``oracle(s, h)`` returns the realizable actions under the current
    constraint set, e.g. an :class:`EliminationOracle`. Returns
    :class:`Pushed` at the first path that meets an epoch after ``h0`` with more
    than one realizable action; otherwise writes the mean return to
    ``q[(s, a0, h0)]`` and returns :class:`QUpdated`.
    """
    s0, h0 = start
    horizon = sim.horizon
    totals = []
    for _ in range(n_paths):
        session.reset_to(s0, h0)
        state, total = session.step(a0)
        last = None
        for h in range(h0 + 1, horizon):
            options = oracle(state, h)
            a = options[0] if len(options) == 1 else _argmax(options, q, state, h)
            if len(options) > 1:
                last = (state, h, a, options)
            nxt, r = session.step(a)
            total += r
            state = nxt
        if last is not None:
            state, h, a1, options = last
            a2 = next(b for b in options if b != a1)
            item = UncertaintyItem(state, a1, a2, h)
            stack.push(item, options)
            return Pushed(item)
        totals.append(total)
    value = math.fsum(totals) / n_paths
    q[(s0, a0, h0)] = value
    return QUpdated(value)


def run_policy_elimination(sim: StochasticSim, space: PolicySpace, cfg: RunConfig,
                           on_round: Callable | None = None) -> RunReport:
    if sim.initial_action is None:
        raise ValueError("the simulator needs a fixed initial action; see augment_initial")
    a0 = sim.initial_action
    session = sim.session(cfg.seed)
    constraints = ConstraintSet()
    oracle = EliminationOracle(space, constraints)
    q = QTable()
    stack = UncertaintyStack()
    rounds = []
    queried = set()
    tracked = _TrackingOracle(oracle, queried)

    for k in range(cfg.t_star):
        stack.round = k
        if stack:
            item = stack.top
            out = explore_stochastic(sim, (item.state, item.epoch), item.a1, tracked, q,
                                     cfg.n_paths, stack, session)
            if not isinstance(out, Pushed):
                out = explore_stochastic(sim, (item.state, item.epoch), item.a2, tracked, q,
                                         cfg.n_paths, stack, session)
            if isinstance(out, Pushed):
                event = "push"
            else:
                q1 = q[(item.state, item.a1, item.epoch)]
                q2 = q[(item.state, item.a2, item.epoch)]
                # drop the lower estimate; on a tie drop the lower action id
                if q1 < q2 or (q1 == q2 and item.a1 < item.a2):
                    worse = item.a1
                else:
                    worse = item.a2
                stack.pop(eliminated=worse)
                constraints.add(item.state, worse, item.epoch)
                event = "pop"
        else:
            out = explore_stochastic(sim, (sim.start, 0), a0, tracked, q, cfg.n_paths, stack, session)
            event = "push" if isinstance(out, Pushed) else "clean"
        rec = RoundRecord(k, event, len(stack), len(constraints))
        rounds.append(rec)
        if on_round is not None:
            on_round(rec)

    calls, max_z = oracle.calls, oracle.max_constraints
    certificates = {pair: oracle.solver.actions(*pair) for pair in sorted(queried, key=repr)}
    return RunReport(constraints, q, rounds, stack.events, stack.items, sim.horizon,
                     calls, max_z, certificates, cfg, session.steps)


class _TrackingOracle:
    def __init__(self, oracle: EliminationOracle, queried: set):
        self.oracle = oracle
        self.queried = queried

    def __call__(self, state, epoch):
        self.queried.add((state, epoch))
        return self.oracle(state, epoch)


def audit_trace(report: RunReport, space: PolicySpace | None) -> AuditResult:
    """Stack depth and order, pushed-item independence, sigma bookkeeping, one push per round."""
    return audit_stack(report.stack_events, space, report.horizon)


def optimal_parameters(space: PolicySpace, sim, q=None) -> list:
    """Members that take a Q*-optimal action at every reachable pair with a choice."""
    q = exact_q_star(sim) if q is None else q
    best = optimal_actions(sim, q)
    out = []
    for theta in space.members():
        ok = True
        for (s, h), acts in best.items():
            if len(sim.allowed_actions(s, h)) < 2:
                continue
            if space.action(theta, s, h) not in acts:
                ok = False
                break
        if ok:
            out.append(theta)
    return out


@dataclass
class OutcomeCheck:
    optimal_survived: bool
    all_eps_optimal: bool
    worst_value: Fraction
    v_star: Fraction
    n_survivors: int


def check_outcome(report: RunReport, sim, space: PolicySpace, epsilon) -> OutcomeCheck:
    """Exact evaluation of every surviving member against ``V*``."""
    q = exact_q_star(sim)
    v_star = q.values[(sim.start, 0)]
    stars = optimal_parameters(space, sim, q)
    survived = any(space.avoids(t, report.constraints) for t in stars)
    survivors = report.survivors(space)
    if not survivors:
        raise NotEnumerableError("no surviving members to evaluate")
    values = [policy_value(sim, space.policy(t)) for t in survivors]
    worst = min(values)
    return OutcomeCheck(survived, v_star - worst <= as_fraction(epsilon), worst, v_star, len(survivors))
