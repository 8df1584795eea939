"""Stack-based policy elimination with policy-class generalization.

Exact oracles for concrete policy classes, eluder and Littlestone dimension
search, the simulator and deterministic elimination algorithms with runtime
audits, and an adaptive adversary for regret lower bounds.
"""

from .adversary import (AdversaryRecord, AdversarySession, GreedyAgent, ScriptedAgent, lower_bound_value,
                        new_session, play)
from .complexity import (DimensionResult, IndependenceSequence, ShatteredTree, eluder_dim_exact,
                         fourier_dim_check, gf2_standard_tree, littlestone_dim_exact,
                         random_feature_experiment, threshold_shatter_witness)
from .det_elim import (DetElimAgent, DetRunReport, PathBook, audit_deterministic,
                       run_deterministic_elimination, det_regret_bound)
from .env import (DeterministicMdp, QTable, StochasticSim, Trajectory, augment_initial, exact_q_star,
                  policy_value, q_gap, regret, rollout)
from .errors import (AssumptionViolation, ConfigError, DPLimitExceeded, EluderError, EmptyClassError,
                     EnvironmentContractError, InvalidActionError, MissingFeatureError,
                     NotEnumerableError, OracleUnavailableError)
from .policy import (ConstraintSet, EliminationOracle, Finite, FourierSupport, Gf2Linear, LinearThreshold,
                     PolicySpace, RelabeledSpace, TabularAll, UncertaintyItem, brute_force_oracle,
                     elimination_oracle, is_dependent, policy_action)
from .stack import AuditResult, UncertaintyStack, audit_stack
from .stoch_elim import RunConfig, RunReport, audit_trace, default_parameters, run_policy_elimination

__version__ = "0.1.0"
