"""Span-regularized optimistic learning for weakly communicating MDPs."""
from .agents import (AgentConfig, EpisodeLog, RunResult, default_c, episode_should_end,
                     hindsight_ck, run_agent, run_regal_c, run_regal_d, run_ucrl2_baseline)
from .confidence import ConfidenceSet, VisitCounts, build_confidence_set, contains, empirical_model
from .diameters import (analyze, d_opt, d_worst, diameter, hitting_times, min_hitting_time,
                        one_way_diameter, verify_bias_hitting_bound)
from .envs import (LowerBoundParams, build_env, make_two_state, make_lower_bound,
                   make_random_wc, make_single_state)
from .harness import ExperimentConfig, ExperimentSummary, regret_at, run_experiment
from .kernels import BACKEND
from .mdp import (ConvergenceError, GainBias, Mdp, MdpError, aperiodicity_transform, emit_mdp,
                  evaluate_policy, load_mdp, parse_mdp, policy_gain, solve_gain_bias, span)
from .planner import PlanResult, constrained_plan, evi, lp_inner_oracle, regularized_plan

__version__ = "0.1.0"
