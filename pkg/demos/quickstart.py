"""
Learning a small MDP from scratch
=================================

Solve a random episodic MDP exactly, then let the optimistic learner play
it for a few thousand episodes. The bonus behind the regret guarantee is
conservative, so at this scale the per-episode regret stays small but
does not visibly shrink; the cumulative regret sits far below the bound.
"""

from aqucb import BonusSchedule, backward_induction, random_mdp, run_experiment, trivial_aggregation
from aqucb import ExperimentConfig, run_seed

# a tiny instance: two stages, one state, two actions
mdp = random_mdp(2, 1, 2, seed=0)
Q, V = backward_induction(mdp)
print("optimal value from s1:", V[0, mdp.initial_state])

# every (state, action) pair gets its own cell, so the aggregation is exact
agg = trivial_aggregation(*mdp.shape)
K = 4000
ledger = run_seed(mdp, agg, K, seed=0, sched=BonusSchedule(mdp.horizon, K, delta=0.1))

# regret of the greedy policy, averaged over blocks of episodes
blocks = ledger.instantaneous.reshape(8, -1).mean(axis=1)
for i, b in enumerate(blocks):
    print(f"episodes {i * K // 8 + 1:5d}-{(i + 1) * K // 8:5d}: mean regret {b:.4f}")
print("cumulative regret:", round(ledger.regret, 2))

# the same run through the experiment harness, as the CLI would do it
cfg = ExperimentConfig({"generator": "random", "H": 2, "S": 1, "A": 2, "seed": 0},
                       aggregation={"kind": "trivial"}, K=K, seeds=[0, 1, 2])
summary = run_experiment(cfg).summary
print("final regret per seed:", {s: round(r, 2) for s, r in summary["final_regret"].items()})
print("below the regret bound:", summary["runs_below_bound"], "of", len(cfg.seeds))
