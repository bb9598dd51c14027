import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqucb.agent import (AgentState, BonusSchedule, Trajectory, alpha,
                         alpha_weights, baseline_greedy_sarsa, bonus, initial_trajectory, rollout,
                         run_aqucb, update_from_trajectory, zero_bonus)
from aqucb.aggregation import Aggregation, trivial_aggregation
from aqucb.envs import random_mdp
from aqucb.mdp import EpisodicMdp, backward_induction, policy_value


def weights_by_definition(t, H):
    """Direct products from the definition, no shared code path."""
    a = [None] + [(H + 1) / (H + j) for j in range(1, t + 1)]
    w0 = 1.0
    for j in range(1, t + 1):
        w0 *= 1 - a[j]
    out = [w0]
    for i in range(1, t + 1):
        p = a[i]
        for j in range(i + 1, t + 1):
            p *= 1 - a[j]
        out.append(p)
    return np.array(out)


def test_alpha_values():
    for H in (1, 3, 10):
        assert alpha(1, H) == 1.0
    assert alpha(2, 1) == pytest.approx(2 / 3, abs=1e-15)
    vals = [alpha(t, 4) for t in range(1, 10**4 + 1)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        alpha(0, 2)


def test_alpha_weights_small_cases():
    np.testing.assert_array_equal(alpha_weights(0, 3), [1.0])
    np.testing.assert_array_equal(alpha_weights(1, 3), [0.0, 1.0])
    np.testing.assert_allclose(alpha_weights(2, 1), [0.0, 1 / 3, 2 / 3], atol=1e-15)


@pytest.mark.parametrize("H", [1, 2, 5])
@pytest.mark.parametrize("t", [1, 2, 7, 40])
def test_alpha_weights_match_definition(t, H):
    w = alpha_weights(t, H)
    np.testing.assert_allclose(w, weights_by_definition(t, H), rtol=1e-12, atol=1e-300)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert w[0] == 0.0 and np.all(w >= 0)


def test_bonus_constant_without_epsilon():
    sched = BonusSchedule(3, 50, 0.2)
    expected = 2 * 3 ** 1.5 * math.sqrt(math.log(3 * 50 / 0.2))
    assert all(bonus(i, sched) == pytest.approx(expected, rel=1e-15) for i in (1, 2, 9, 1000))


def test_bonus_reference_value():
    # 2 * 2^1.5 * sqrt(log 2000), evaluated with mpmath at 30 digits
    assert bonus(7, BonusSchedule(2, 100, 0.1)) == pytest.approx(15.5957968281632418669981137186, rel=1e-14)


def test_bonus_epsilon_term_separates():
    a = bonus(4, BonusSchedule(2, 100, 0.1, epsilon=0.5))
    b = bonus(4, BonusSchedule(2, 100, 0.1, epsilon=0.0))
    assert a - b == pytest.approx(1.0, abs=1e-12)


def test_bonus_schedule_validation():
    with pytest.raises(ValueError):
        BonusSchedule(2, 10, 1.0)
    with pytest.raises(ValueError):
        BonusSchedule(2, 0, 0.1)
    with pytest.raises(ValueError):
        BonusSchedule(2, 10, 0.1, epsilon=-1)
    with pytest.raises(ValueError):
        bonus(0, BonusSchedule(2, 10, 0.1))


def test_fresh_state():
    st_ = AgentState.fresh(3, 4)
    assert np.all(st_.q_hat[:3] == 3) and np.all(st_.q_hat[3] == 0)
    assert np.all(st_.visits == 0)


def test_first_visit_replaces_initial_value():
    H, M = 3, 2
    agg = Aggregation(M, np.zeros((H, 1, 2), dtype=int) + np.array([0, 1]))
    state = AgentState.fresh(H, M)
    state.q_hat[1] = [0.4, 0.7]
    state.q_hat[2] = [0.1, 0.2]
    traj = Trajectory([0, 0, 0], [0, 1, 1], [0.25, 0.5, 0.5])
    update_from_trajectory(state, traj, agg, lambda i: 0.05)
    # stage 1 bootstraps from stage 2's pre-episode max 0.7
    assert state.q_hat[0, 0] == pytest.approx(0.25 + 0.7 + 0.05)
    assert state.q_hat[1, 1] == pytest.approx(0.5 + 0.2 + 0.05)
    assert state.q_hat[2, 1] == pytest.approx(0.5 + 0.0 + 0.05)
    assert state.visits.tolist() == [[1, 0], [0, 1], [0, 1]]


def test_capping_at_horizon():
    H = 2
    agg = Aggregation(1, np.zeros((H, 1, 1), dtype=int))
    state = AgentState.fresh(H, 1)
    update_from_trajectory(state, Trajectory([0, 0], [0, 0], [1.0, 1.0]), agg, lambda i: 50.0)
    assert np.all(state.q_hat[:H] == H)


def test_single_cell_recurrence():
    # H=1, M=1: q_n = min(H, sum_j w_n^j (r + beta/sqrt j)) with w from alpha_weights
    H, r, beta = 1, 0.3, 0.4
    agg = Aggregation(1, np.zeros((1, 1, 1), dtype=int))
    state = AgentState.fresh(H, 1)
    for n in range(1, 60):
        update_from_trajectory(state, Trajectory([0], [0], [r]), agg, lambda i: beta)
        w = weights_by_definition(n, H)
        targets = np.array([r + beta / math.sqrt(j) for j in range(1, n + 1)])
        assert state.q_hat[0, 0] == pytest.approx(min(H, float(w[1:] @ targets)), abs=1e-12)


def snapshot_update(state, traj, agg, bonus_fn):
    """Reference: every bootstrap read from a frozen copy of the pre-episode table."""
    before = state.q_hat.copy()
    H = state.H
    for h in range(H):
        m = agg.maps[h, traj.states[h], traj.actions[h]]
        state.visits[h, m] += 1
        t = state.visits[h, m]
        v = before[h + 1, agg.maps[h + 1, traj.states[h + 1]]].max() if h + 1 < H else 0.0
        a = alpha(t, H)
        state.q_hat[h, m] = min((1 - a) * state.q_hat[h, m] + a * (traj.rewards[h] + v + bonus_fn(t) / math.sqrt(t)), H)


def test_in_place_update_equals_snapshot_reference():
    mdp = random_mdp(4, 3, 2, seed=2)
    agg = Aggregation(3, np.random.default_rng(0).integers(3, size=(4, 3, 2)))
    sched = BonusSchedule(4, 100, 0.1)
    rng = np.random.default_rng(1)
    a, b = AgentState.fresh(4, 3), AgentState.fresh(4, 3)
    for _ in range(300):
        traj = initial_trajectory(mdp, rng)
        update_from_trajectory(a, traj, agg, lambda i: 0.1 * sched(i))
        snapshot_update(b, traj, agg, lambda i: 0.1 * sched(i))
        assert a.q_hat.tobytes() == b.q_hat.tobytes()
        assert np.array_equal(a.visits, b.visits)


def test_update_rejects_wrong_length():
    agg = trivial_aggregation(3, 1, 1)
    with pytest.raises(ValueError, match="stages"):
        update_from_trajectory(AgentState.fresh(3, 1), Trajectory([0], [0], [0.0]), agg, zero_bonus)


def test_fresh_rollout_takes_action_zero():
    mdp = random_mdp(4, 3, 3, seed=0)
    agg = trivial_aggregation(4, 3, 3)
    traj = rollout(AgentState.fresh(4, 9), mdp, agg, np.random.default_rng(0))
    assert traj.actions == [0, 0, 0, 0]
    assert traj.states[0] == mdp.initial_state


def test_rollout_with_exact_values_is_optimal():
    mdp = random_mdp(4, 4, 3, sparsity=1, seed=6)
    Q, V = backward_induction(mdp)
    agg = trivial_aggregation(4, 4, 3)
    state = AgentState.fresh(4, 12)
    state.q_hat[:4] = Q[:4].reshape(4, 12)
    traj = rollout(state, mdp, agg, np.random.default_rng(0))
    assert sum(traj.rewards) == pytest.approx(V[0, mdp.initial_state], abs=1e-12)


def test_rollout_reproducible():
    mdp = random_mdp(5, 4, 2, seed=1)
    agg = trivial_aggregation(5, 4, 2)
    state = AgentState.fresh(5, 8)
    state.q_hat[:5] = np.random.default_rng(3).random((5, 8))
    t1 = rollout(state, mdp, agg, np.random.default_rng(42))
    t2 = rollout(state, mdp, agg, np.random.default_rng(42))
    assert t1 == t2


def test_initial_trajectory_single_action():
    mdp = random_mdp(3, 3, 1, seed=0)
    traj = initial_trajectory(mdp, np.random.default_rng(0))
    assert traj.actions == [0, 0, 0] and len(traj) == 3
    assert initial_trajectory(mdp, np.random.default_rng(5)).states[0] == mdp.initial_state


def test_initial_trajectory_reproducible():
    mdp = random_mdp(4, 3, 3, seed=0)
    assert initial_trajectory(mdp, np.random.default_rng(9)) == initial_trajectory(mdp, np.random.default_rng(9))


def test_initial_actions_uniform():
    mdp = random_mdp(1, 2, 4, seed=0)
    rng = np.random.default_rng(0)
    n = 10**5
    counts = np.bincount([initial_trajectory(mdp, rng).actions[0] for _ in range(n)], minlength=4)
    assert np.all(np.abs(counts - n / 4) <= 3 * math.sqrt(n * 0.25 * 0.75))


def test_run_with_no_episodes():
    mdp = random_mdp(3, 2, 2, seed=0)
    agg = trivial_aggregation(3, 2, 2)
    res = run_aqucb(mdp, agg, BonusSchedule(3, 10, 0.1), 0, seed=0)
    assert len(res.trajectories) == 1
    assert np.all(res.state.q_hat[:3] == 3) and res.state.visits.sum() == 0
    base = baseline_greedy_sarsa(mdp, agg, 0, seed=0)
    assert np.all(base.state.q_hat[:3] == 3)


def test_visit_accounting():
    mdp = random_mdp(3, 3, 2, seed=1)
    agg = Aggregation(4, np.random.default_rng(2).integers(4, size=(3, 3, 2)))
    res = run_aqucb(mdp, agg, BonusSchedule(3, 1, 0.1), 1, seed=0)
    np.testing.assert_array_equal(res.state.visits.sum(axis=1), [1, 1, 1])
    res = run_aqucb(mdp, agg, BonusSchedule(3, 250, 0.1), 250, seed=0)
    np.testing.assert_array_equal(res.state.visits.sum(axis=1), [250] * 3)
    assert len(res.trajectories) == 251


def test_run_is_deterministic():
    mdp = random_mdp(3, 3, 2, seed=1)
    agg = trivial_aggregation(3, 3, 2)
    sched = BonusSchedule(3, 300, 0.1)
    a = run_aqucb(mdp, agg, sched, 300, seed=4)
    b = run_aqucb(mdp, agg, sched, 300, seed=4)
    assert a.state.q_hat.tobytes() == b.state.q_hat.tobytes()
    assert a.trajectories == b.trajectories
    assert np.array_equal(a.policy, b.policy)


def test_baseline_is_zero_bonus_run():
    mdp = random_mdp(3, 3, 2, seed=1)
    agg = trivial_aggregation(3, 3, 2)
    a = baseline_greedy_sarsa(mdp, agg, 200, seed=3)
    b = run_aqucb(mdp, agg, None, 200, seed=3, bonus_fn=lambda i: 0.0)
    assert a.state.q_hat.tobytes() == b.state.q_hat.tobytes()
    assert a.trajectories == b.trajectories


def test_hook_sees_greedy_policy_of_each_episode():
    mdp = random_mdp(3, 3, 2, seed=1)
    agg = trivial_aggregation(3, 3, 2)
    seen = []
    res = run_aqucb(mdp, agg, BonusSchedule(3, 20, 0.1), 20, seed=0,
                    on_episode=lambda k, s, pi: seen.append((k, pi.copy(), s.episode_index)))
    assert [k for k, _, _ in seen] == list(range(1, 21))
    assert all(k == idx for k, _, idx in seen)
    for (k, pi, _), traj in zip(seen, res.trajectories[1:]):
        assert traj.actions == [pi[h][s] for h, s in enumerate(traj.states)]


def test_learning_reduces_regret():
    # one state, two stages: small enough to leave the capped phase within K
    mdp = random_mdp(2, 1, 2, seed=0)
    agg = trivial_aggregation(2, 1, 2)
    _, V = backward_induction(mdp)
    K = 2000
    sched = BonusSchedule(2, K, 0.1)
    early, late = [], []
    for seed in range(20):
        inst = []
        run_aqucb(mdp, agg, sched, K, seed, keep_trajectories=False,
                  on_episode=lambda k, s, pi: inst.append(V[0, 0] - policy_value(mdp, pi)[0, 0]))
        early.append(np.mean(inst[: K // 10]))
        late.append(np.mean(inst[-K // 10:]))
    assert np.mean(late) < np.mean(early)


def test_snapshot_round_trip(tmp_path):
    mdp = random_mdp(3, 2, 2, seed=0)
    res = run_aqucb(mdp, trivial_aggregation(3, 2, 2), BonusSchedule(3, 50, 0.1), 50, seed=0)
    res.state.save(tmp_path / "agent.json")
    back = AgentState.load(tmp_path / "agent.json")
    assert back.q_hat.tobytes() == res.state.q_hat.tobytes()
    assert np.array_equal(back.visits, res.state.visits) and back.episode_index == 50
    assert set(res.state.snapshot()) == {"H", "M", "q_hat", "visits", "episode_index"}


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), H=st.integers(1, 4), M=st.integers(1, 5),
       scale=st.sampled_from([0.0, 0.01, 0.3, 1.0]), noise=st.sampled_from([0.0, 0.1]))
def test_estimates_stay_in_range(seed, H, M, scale, noise):
    base = random_mdp(H, 3, 2, seed=seed, reward_range=(0.1, 0.9))
    mdp = EpisodicMdp(H, 3, 2, 0, base.transitions, base.rewards, reward_noise=noise)
    agg = Aggregation(M, np.random.default_rng(seed).integers(M, size=(H, 3, 2)))
    sched = BonusSchedule(H, 60, 0.1)
    low = []
    res = run_aqucb(mdp, agg, None, 60, seed, bonus_fn=lambda i: scale * sched(i),
                    on_episode=lambda k, s, pi: low.append(s.q_hat.min()))
    assert min(low) >= 0.0
    assert res.state.q_hat.max() <= H
    assert np.all(np.diff([0] + [int(v) for v in res.state.visits.sum(axis=1)]) >= 0)
