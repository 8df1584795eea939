"""
Elimination in a deterministic system
=====================================

A random layered MDP with binary actions and a planted Gf2 optimum. The agent
replays stored paths instead of restarting a simulator, and every stack
operation is checked against exact dynamic programming.
"""

from eluder_rl.complexity import eluder_dim_exact
from eluder_rl.det_elim import (audit_deterministic, run_deterministic_elimination, stack_episode_bound,
                                det_regret_bound)
from eluder_rl.instances import random_det_instance

inst = random_det_instance(seed=7, horizon=4, dimension=3)
mdp, space = inst.env, inst.space
print(f"{len(mdp.states)} states, horizon {mdp.horizon}, reward bound {mdp.reward_bound}")

# the class is linear over GF(2), so its eluder dimension is the feature rank
dim_e = eluder_dim_exact(space, list(space.features)).value
print("eluder dimension:", dim_e)

# stack operations stop after a bounded number of episodes; play a few more
episodes = stack_episode_bound(mdp.horizon, dim_e) + 5
report = run_deterministic_elimination(mdp, space, episodes)

print("episode events:", "".join({"push": "+", "pop": "-", "pop+push": "~", "clean": "."}[e]
                                 for e in report.events))

# regret is only paid in episodes that touch the stack
print("\nepisode  event      reward  cumulative regret")
for rec, cum in zip(report.episodes, report.cumulative_regret()):
    if rec.event != "clean":
        print(f"{rec.episode:7d}  {rec.event:9s}  {str(rec.reward):6s}  {cum}")
print(f"V* = {report.v_star}, earned by every clean episode")

bound = det_regret_bound(mdp.reward_bound, mdp.horizon, dim_e)
print(f"\ntotal regret {report.regret()} against the bound {bound}")

# pushes and pops must see exact optimal values; clean episodes must earn V*
audit = audit_deterministic(report, space, mdp)
print("audit:", "pass" if audit.ok else audit.violations)
print("planted parameter still consistent:", space.avoids(inst.theta_star, report.constraints))
