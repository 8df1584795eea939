"""Seeded random instances with a planted optimal parameter.

Deterministic instances are layered graphs whose rewards are built backwards
so that the planted Gf2 policy is the unique optimum at every state. Stochastic
instances add Bernoulli rewards and random kernels, then are checked exactly
for a minimum optimality gap.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .env import DeterministicMdp, StochasticSim, augment_initial, q_gap
from .errors import AssumptionViolation
from .policy import Gf2Linear, PolicySpace


@dataclass
class Instance:
    env: object
    space: PolicySpace
    theta_star: object
    seed: int
    gap: object = None


def _layers(rng: random.Random, horizon: int, max_states: int, width: int) -> list[list[int]]:
    layers, nxt = [[0]], 1
    for h in range(1, horizon):
        room = max_states - nxt - (horizon - h - 1)  # leave one state for each later epoch
        n = rng.randint(1, max(1, min(width, room)))
        layers.append(list(range(nxt, nxt + n)))
        nxt += n
    return layers


def random_det_instance(seed: int, horizon: int | None = None, dimension: int | None = None,
                        max_states: int = 64, width: int = 12) -> Instance:
    """Random layered deterministic MDP with binary actions and a planted Gf2 optimum.

    At every state the planted action beats the other one by at least 1/4, so the
    planted parameter is the unique optimal class member.
    """
    rng = random.Random(seed)
    H = horizon if horizon is not None else rng.randint(2, 6)
    D = dimension if dimension is not None else rng.randint(2, 6)
    layers = _layers(rng, H, max_states, width)
    theta = rng.randrange(1 << D)
    features = {(s, h): rng.randrange(1 << D) for h, layer in enumerate(layers) for s in layer}
    space = Gf2Linear(D, features)

    transitions, rewards = {}, {}
    value = {}
    for h in reversed(range(H)):
        for s in layers[h]:
            best = space.action(theta, s, h)
            if h < H - 1:
                for a in (0, 1):
                    transitions[(s, a, h)] = rng.choice(layers[h + 1])
                tail = {a: value[transitions[(s, a, h)]] for a in (0, 1)}
            else:
                tail = {0: Fraction(0), 1: Fraction(0)}
            other = 1 - best
            r_other = Fraction(rng.randint(0, 4), 4)
            margin = Fraction(rng.randint(1, 4), 4)
            r_best = max(Fraction(rng.randint(0, 4), 4), r_other + tail[other] - tail[best] + margin)
            rewards[(s, other, h)] = r_other
            rewards[(s, best, h)] = r_best
            value[s] = r_best + tail[best]
    states = [s for layer in layers for s in layer]
    mdp = DeterministicMdp(H, states, (0, 1), transitions, rewards, 0)
    return Instance(mdp, space, theta, seed)


def random_stoch_instance(seed: int, horizon: int = 2, dimension: int = 2, width: int = 4,
                          reward_bound=Fraction(1, 2), min_gap=Fraction(1, 5),
                          max_tries: int = 200) -> Instance:
    """Random stochastic MDP (before the fixed initial step is prepended) with a planted Gf2 optimum.

    Each epoch pays a Bernoulli reward of size ``reward_bound / horizon``: the
    planted action pays with probability at least 9/10, the other never pays.
    Instances whose exact gap falls below ``min_gap`` are redrawn. The returned
    environment already has the fixed initial step, so its horizon is
    ``horizon + 1`` and the class is shifted by one epoch.
    """
    rng = random.Random(seed)
    rbar = Fraction(reward_bound)
    unit = rbar / horizon
    for _ in range(max_tries):
        layers, nxt = [], 0
        for h in range(horizon):
            n = rng.randint(2, width)
            layers.append(list(range(nxt, nxt + n)))
            nxt += n
        theta = rng.randrange(1, 1 << dimension)
        features = {(s, h): rng.randrange(1, 1 << dimension)
                    for h, layer in enumerate(layers) for s in layer}
        space = Gf2Linear(dimension, features)
        kernel, rdist = {}, {}
        for h, layer in enumerate(layers):
            for s in layer:
                best = space.action(theta, s, h)
                p = Fraction(rng.randint(9, 10), 10)
                rdist[(s, best, h)] = ((unit, p), (Fraction(0), 1 - p))
                rdist[(s, 1 - best, h)] = ((Fraction(0), Fraction(1)),)
                if h < horizon - 1:
                    for a in (0, 1):
                        succ = rng.sample(layers[h + 1], k=min(2, len(layers[h + 1])))
                        w = [rng.randint(1, 3) for _ in succ]
                        kernel[(s, a, h)] = tuple((t, Fraction(wi, sum(w))) for t, wi in zip(succ, w))
        states = [s for layer in layers for s in layer]
        base = StochasticSim(horizon, states, (0, 1), layers[0][0], rbar, kernel=kernel, reward_dist=rdist)
        w0 = [rng.randint(1, 3) for _ in layers[0]]
        p0 = {s: Fraction(wi, sum(w0)) for s, wi in zip(layers[0], w0)}
        sim = augment_initial(base, p0)
        shifted = space.shifted(1)
        try:
            gap = q_gap(sim, shifted)
        except AssumptionViolation:
            continue
        if gap >= min_gap and gap != math.inf:
            return Instance(sim, shifted, theta, seed, gap)
    raise RuntimeError(f"no instance with gap >= {min_gap} after {max_tries} draws (seed {seed})")
