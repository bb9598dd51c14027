"""Optimistic Q-learning with aggregated states for episodic MDPs."""
from .aggregation import Aggregation, epsilon_of, trivial_aggregation
from .agent import (AgentState, BonusSchedule, Trajectory, alpha, alpha_weights,
                    baseline_greedy_sarsa, bonus, run_aqucb)
from .envs import DuplicationSpec, chain_mdp, expand_aggregate_mdp, random_mdp
from .harness import (ExperimentConfig, asymptotic_loss_check, run_experiment, run_seed,
                      theorem_bound, visit_sum_check)
from .mdp import EpisodicMdp, backward_induction, enumerate_policies, greedy_policy, policy_value

__version__ = "0.1.0"
