"""
Elimination with a simulator
============================

Two arms paying 1 with probability 0.7 and 0.3, behind a fixed first step. The
learner only sees Monte Carlo returns, yet with the theory-sized sample count it
removes the worse arm. A random multi-epoch instance follows.
"""

from fractions import Fraction

from eluder_rl import Finite, StochasticSim, augment_initial, q_gap
from eluder_rl.complexity import eluder_dim_exact
from eluder_rl.instances import random_stoch_instance
from eluder_rl.stoch_elim import (RunConfig, audit_trace, check_outcome, default_parameters,
                                  run_policy_elimination)

arms = StochasticSim(1, (0,), (0, 1), 0, 1, kernel={},
                     reward_dist={(0, 0, 0): ((1, Fraction(3, 10)), (0, Fraction(7, 10))),
                                  (0, 1, 0): ((1, Fraction(7, 10)), (0, Fraction(3, 10)))})
sim = augment_initial(arms, {0: 1})
space = Finite([{(0, 1): 0}, {(0, 1): 1}])
gap = q_gap(sim, space)
t_star, n = default_parameters(sim.horizon, 1, gap, 1, 0.1, 0.1)
print(f"gap {gap}, rounds {t_star}, paths per call {n}")

picked = []
for seed in range(10):
    report = run_policy_elimination(sim, space, RunConfig(t_star, n, seed=seed))
    picked.append([a for _, a, _ in report.constraints])
print("eliminated arm per seed:", picked)

# a random instance: several epochs, random kernels, Bernoulli rewards
inst = random_stoch_instance(seed=3, horizon=3, reward_bound=Fraction(1))
dim_e = eluder_dim_exact(inst.space, list(inst.space.features)).value
t_star, n = default_parameters(inst.env.horizon, dim_e, inst.gap, inst.env.reward_bound, 0.1, 0.2)
report = run_policy_elimination(inst.env, inst.space, RunConfig(t_star, n, seed=0))
outcome = check_outcome(report, inst.env, inst.space, 0.1)

print(f"\n{len(inst.env.states)} states, gap {float(inst.gap):.3f}, eluder dimension {dim_e}")
print("round events:", "".join({"push": "+", "pop": "-", "clean": "."}[e] for e in report.events))
print(f"{outcome.n_survivors} surviving parameters, worst value {float(outcome.worst_value):.3f}"
      f" vs V* {float(outcome.v_star):.3f}")
print(f"oracle calls {report.oracle_calls}, simulator steps {report.samples}")
print("stack audit:", "pass" if audit_trace(report, inst.space).ok else "fail")
