"""
How much does aggregation cost?
===============================

Copies of the same latent state can share one estimate. With identical
copies the aggregation error is zero; perturbing their rewards makes the
cells inexact, and the learner pays roughly epsilon * H per episode.
"""

import numpy as np

from aqucb import DuplicationSpec, backward_induction, epsilon_of, expand_aggregate_mdp, random_mdp
from aqucb import BonusSchedule, asymptotic_loss_check, run_seed

base = random_mdp(4, 4, 2, seed=0, reward_range=(0.1, 0.9))

for eta in (0.0, 0.03, 0.05, 0.1):
    mdp, agg, eps = expand_aggregate_mdp(DuplicationSpec(base, copies=3, reward_perturbation=eta))
    print(f"eta={eta:.2f}: {mdp.num_states} states, {agg.num_cells} cells, epsilon={eps:.4f}")

# the measured error agrees with a direct recomputation
mdp, agg, eps = expand_aggregate_mdp(DuplicationSpec(base, copies=3, reward_perturbation=0.05))
Q, _ = backward_induction(mdp)
assert eps == epsilon_of(mdp, agg, Q)

# learn on the inexact aggregation; the bonus grows with epsilon * sqrt(i)
K = 20000
sched = BonusSchedule(4, K, 0.1, eps)
ledger = run_seed(mdp, agg, K, seed=0, sched=sched, stride=10)
chk = asymptotic_loss_check(ledger.instantaneous, eps, 4, agg.num_cells, 0.1)
print(f"tail mean regret {chk.tail_mean:.4f}, 6*eps*H = {6 * eps * 4:.4f}, threshold {chk.threshold:.2f}")
print("late-episode regret, last 5 blocks:", np.round(ledger.instantaneous.reshape(20, -1).mean(1)[-5:], 4))
