from fractions import Fraction

import pytest

from eluder_rl.env import DeterministicMdp
from eluder_rl.policy import Gf2Linear


def bandit(r0, r1):
    """One epoch, one state, two arms."""
    return DeterministicMdp(1, [0], (0, 1), {}, {(0, 0, 0): Fraction(r0), (0, 1, 0): Fraction(r1)}, 0)


def binary_tree_mdp(horizon, terminal_reward):
    """States ``0..2^h-1`` at epoch ``h``; ``F(s, a, h) = 2^h a + s``; reward only at the last epoch."""
    states = list(range(1 << (horizon - 1)))
    transitions, rewards = {}, {}
    for h in range(horizon):
        for s in range(1 << h):
            for a in (0, 1):
                if h < horizon - 1:
                    transitions[(s, a, h)] = (1 << h) * a + s
                    rewards[(s, a, h)] = Fraction(0)
                else:
                    rewards[(s, a, h)] = Fraction(terminal_reward(s))
    return DeterministicMdp(horizon, states, (0, 1), transitions, rewards, 0)


def chain_mdp(rewards):
    """Single state per epoch; both actions move on; action 1 pays ``rewards[h]``, action 0 pays 0."""
    H = len(rewards)
    transitions = {(0, a, h): 0 for h in range(H - 1) for a in (0, 1)}
    rew = {}
    for h, r in enumerate(rewards):
        rew[(0, 1, h)] = Fraction(r)
        rew[(0, 0, h)] = Fraction(0)
    return DeterministicMdp(H, [0], (0, 1), transitions, rew, 0)


@pytest.fixture
def bandit_37():
    return bandit(Fraction(3, 10), Fraction(7, 10))


@pytest.fixture
def two_arm_space():
    """Gf2 D=1 realizing both arms at (0, 0)."""
    return Gf2Linear(1, {(0, 0): 1})


# one verdict line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
