"""
An adversary that hides the best leaf
=====================================

The environment is a depth-3 binary tree whose features come from a shattered
tree of the Gf2 class, released only when a state is first visited. Each newly
reached leaf pays more than the previous one, so no deterministic learner can
find the top reward cheaply.
"""

from eluder_rl.adversary import ScriptedAgent, lower_bound_value, make_agent, new_session, play
from eluder_rl.complexity import gf2_standard_tree

base, tree = gf2_standard_tree(7)

print("agent      T   regret  min(D/4, T/2)  optimal policy in class")
for kind in ("greedy", "det-elim"):
    for T in (2, 4, 8, 16):
        session = new_session(tree, base, horizon=3, reward_bound=1)
        rec = play(session, make_agent(kind, session), T)
        print(f"{kind:9s} {T:3d}  {str(rec.regret):6s}  {str(rec.proof_bound):13s}  {rec.optimal_in_class}")

# an agent that never explores pays a fixed amount every episode
session = new_session(tree, base, horizon=3, reward_bound=1)
rec = play(session, ScriptedAgent([(0, 0, 0)]), 5)
print("\nrepeating one path:", [str(c) for c in rec.cumulative_regret()])
print("optimal parameter after freezing:", format(rec.optimal_parameter, "07b"))

print("\nlower bound for dim_L=8, H=3, R=1:",
      {T: str(lower_bound_value(8, 3, T, 1)) for T in (1, 4, 10, 100)})
