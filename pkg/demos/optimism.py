"""
Optimism, with and without the bonus
====================================

With the bonus every estimate stays above the true optimal value; drop it
and the estimates can fall below Q*, after which the greedy learner may
stop visiting the actions it underrates.
"""

from aqucb import BonusSchedule, random_mdp, trivial_aggregation
from aqucb import run_seed

mdp = random_mdp(3, 3, 2, seed=1)
agg = trivial_aggregation(*mdp.shape)
K = 1000

for agent in ("aqucb", "greedy_sarsa"):
    optimistic = 0
    regret = 0.0
    for seed in range(10):
        sched = BonusSchedule(3, K, 0.1) if agent == "aqucb" else None
        ledger = run_seed(mdp, agg, K, seed, agent=agent, sched=sched, monitor_optimism=True)
        optimistic += ledger.optimistic
        regret += ledger.regret / 10
    print(f"{agent:13s} optimistic in {optimistic}/10 runs, mean regret {regret:.1f}")
