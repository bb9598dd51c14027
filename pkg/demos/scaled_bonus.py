"""
Shrinking the bonus
===================

The bonus that backs the regret guarantee is large: with H=4 it is around
60 at every visit, far above the value cap, so estimates stay pinned at H
for a long time. Any callable can be injected as the bonus; here we scale
the schedule down and compare regret on the chain.
"""

from aqucb import BonusSchedule, backward_induction, chain_mdp, trivial_aggregation
from aqucb.harness import run_seed

H, L, K = 8, 6, 5000
mdp = chain_mdp(H, L, 0.1)
agg = trivial_aggregation(*mdp.shape)
q, v = backward_induction(mdp)
sched = BonusSchedule(H, K, 0.1)
print(f"V*(s1) = {v[0, 0]:.3f}; full bonus beta_1 = {sched(1):.1f}")

for scale in (1.0, 0.1, 0.01, 0.0):
    regrets = [run_seed(mdp, agg, K, seed, bonus_fn=lambda i, c=scale: c * sched(i), q_star=q, v_star=v).regret
               for seed in range(5)]
    print(f"bonus x {scale:<5}: mean regret {sum(regrets) / 5:8.1f}")
