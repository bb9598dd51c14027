"""AQ-UCB: optimistic Q-learning over aggregated state-action cells.

The learner keeps one estimate ``q_hat[h, m]`` and one visit counter
``visits[h, m]`` per stage and cell. Each episode it replays the previous
trajectory through the stepsize ``alpha_t = (H + 1) / (H + t)`` update with an
optimism bonus, caps estimates at ``H``, and then rolls out the greedy policy.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .aggregation import Aggregation, validate
from .mdp import EpisodicMdp


def alpha(t: int, H: int) -> float:
    """Stepsize for the ``t``-th visit (``t >= 1``)."""
    if t < 1:
        raise ValueError(f"stepsize index must be >= 1, got {t}")
    return (H + 1) / (H + t)


def alpha_weights(t: int, H: int) -> np.ndarray:
    """Effective weights ``[w_0, ..., w_t]`` of the initial value and the ``t`` targets.

    ``w_0 = prod_{j<=t} (1 - alpha_j)`` and
    ``w_i = alpha_i * prod_{i<j<=t} (1 - alpha_j)``.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return np.ones(1)
    j = np.arange(1, t + 1, dtype=float)
    a = (H + 1) / (H + j)
    one_minus = 1.0 - a
    # tail[i] = prod_{j=i+1}^{t} (1 - alpha_j), computed right-to-left
    tail = np.ones(t + 1)
    tail[:-1] = np.cumprod(one_minus[::-1])[::-1]
    w = np.empty(t + 1)
    w[0] = tail[0]
    w[1:] = a * tail[1:]
    return w


@dataclass(frozen=True)
class BonusSchedule:
    """``beta_i = 2 H^{3/2} sqrt(log(H K / delta)) + epsilon * sqrt(i)``."""

    H: int
    K: int
    delta: float
    epsilon: float = 0.0

    def __post_init__(self):
        if self.H < 1:
            raise ValueError("H must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.H * self.K / self.delta <= 1:
            raise ValueError("log(H K / delta) must be positive")

    @property
    def base(self) -> float:
        return 2.0 * self.H ** 1.5 * math.sqrt(math.log(self.H * self.K / self.delta))

    def __call__(self, i: int) -> float:
        return bonus(i, self)


def bonus(i: int, sched: BonusSchedule) -> float:
    if i < 1:
        raise ValueError(f"bonus index must be >= 1, got {i}")
    return sched.base + sched.epsilon * math.sqrt(i)


def zero_bonus(i: int) -> float:
    return 0.0


@dataclass
class Trajectory:
    """One episode: ``states[h]``, ``actions[h]``, ``rewards[h]`` for ``h < H``.

    The successor of stage ``h`` is ``states[h + 1]``.
    """

    states: list[int]
    actions: list[int]
    rewards: list[float]

    def __len__(self):
        return len(self.states)


@dataclass
class AgentState:
    """Everything the learner remembers.

    ``q_hat`` has shape ``(H + 1, M)``; the last row is the terminal stage
    and stays zero. ``visits`` has shape ``(H, M)``.
    """

    H: int
    M: int
    q_hat: np.ndarray
    visits: np.ndarray
    episode_index: int = 0

    @classmethod
    def fresh(cls, H: int, M: int) -> "AgentState":
        q = np.full((H + 1, M), float(H))
        q[H] = 0.0
        return cls(H, M, q, np.zeros((H, M), dtype=np.int64))

    def copy(self) -> "AgentState":
        return AgentState(self.H, self.M, self.q_hat.copy(), self.visits.copy(), self.episode_index)

    def snapshot(self) -> dict:
        return {
            "H": self.H,
            "M": self.M,
            "q_hat": self.q_hat[: self.H].tolist(),
            "visits": self.visits.tolist(),
            "episode_index": self.episode_index,
        }

    @classmethod
    def from_snapshot(cls, d: dict) -> "AgentState":
        H, M = int(d["H"]), int(d["M"])
        q = np.zeros((H + 1, M))
        q[:H] = np.array(d["q_hat"], dtype=float)
        visits = np.array(d["visits"], dtype=np.int64).reshape(H, M)
        return cls(H, M, q, visits, int(d["episode_index"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.snapshot()) + "\n")

    @classmethod
    def load(cls, path) -> "AgentState":
        return cls.from_snapshot(json.loads(Path(path).read_text()))


def raw_q(state: AgentState, agg: Aggregation) -> np.ndarray:
    """Estimates projected onto raw pairs: ``q_hat[h, phi_h(s, a)]``, shape ``(H, S, A)``."""
    H = state.H
    return np.take_along_axis(state.q_hat[:H], agg.maps.reshape(H, -1), axis=1).reshape(agg.shape)


def agent_greedy_policy(state: AgentState, agg: Aggregation) -> np.ndarray:
    """Greedy raw-state policy ``argmax_a q_hat[h, phi_h(s, a)]``, lowest index on ties."""
    return np.argmax(raw_q(state, agg), axis=-1)


def update_from_trajectory(state: AgentState, traj: Trajectory, agg: Aggregation,
                           bonus_fn: Callable[[int], float]) -> AgentState:
    """Apply one in-place update pass over ``traj`` (stages in increasing order).

    Stage ``h`` reads ``q_hat[h + 1]`` before that stage is touched, so the
    bootstrap value always comes from the previous episode's estimates.
    """
    H = state.H
    if len(traj) != H:
        raise ValueError(f"trajectory has {len(traj)} stages, agent expects {H}")
    if agg.shape[0] != H or agg.num_cells != state.M:
        raise ValueError("aggregation does not match agent dimensions")
    maps = agg.maps
    q = state.q_hat
    n = state.visits
    fH = float(H)
    for h in range(H):
        m = maps[h, traj.states[h], traj.actions[h]]
        n[h, m] += 1
        t = int(n[h, m])
        if h + 1 < H:
            v_next = q[h + 1, maps[h + 1, traj.states[h + 1]]].max()
        else:
            v_next = q[H, 0]
        a_t = (H + 1) / (H + t)
        target = traj.rewards[h] + v_next + bonus_fn(t) / math.sqrt(t)
        q[h, m] = min((1.0 - a_t) * q[h, m] + a_t * target, fH)
    state.episode_index += 1
    return state


def initial_trajectory(mdp: EpisodicMdp, rng: np.random.Generator) -> Trajectory:
    """First trajectory from ``s1`` with uniformly random actions."""
    H, _, A = mdp.shape
    return _sample_path(mdp, rng, lambda h, s: int(rng.integers(A)))


def rollout(state: AgentState, mdp: EpisodicMdp, agg: Aggregation, rng: np.random.Generator,
            policy: np.ndarray | None = None) -> Trajectory:
    """Greedy trajectory under the current estimates.

    ``policy`` may carry a precomputed :func:`agent_greedy_policy` result.
    """
    if policy is None:
        policy = agent_greedy_policy(state, agg)
    pi = policy.tolist()
    return _sample_path(mdp, rng, lambda h, s: pi[h][s])


def _sample_path(mdp: EpisodicMdp, rng: np.random.Generator, choose) -> Trajectory:
    # inlined sample_transition; must draw in the same order
    H = mdp.horizon
    cdf = mdp._cdf
    R = mdp.rewards
    W = mdp.reward_noise
    noisy = bool(np.any(W > 0))
    last = mdp.num_states - 1
    states, actions, rewards = [], [], []
    s = mdp.initial_state
    for h in range(H):
        a = choose(h, s)
        states.append(s)
        actions.append(a)
        if h + 1 < H:
            s_next = min(int(np.searchsorted(cdf[h, s, a], rng.random(), side="right")), last)
        r = float(R[h, s, a])
        if noisy and W[h, s, a] > 0:
            r += float(rng.uniform(-W[h, s, a], W[h, s, a]))
        rewards.append(r)
        if h + 1 < H:
            s = s_next
    return Trajectory(states, actions, rewards)


@dataclass
class RunResult:
    trajectories: list[Trajectory]
    state: AgentState
    policy: np.ndarray


EpisodeHook = Callable[[int, AgentState, np.ndarray], None]


def run_aqucb(mdp: EpisodicMdp, agg: Aggregation, sched: BonusSchedule | None, K: int, seed,
              bonus_fn: Callable[[int], float] | None = None, on_episode: EpisodeHook | None = None,
              keep_trajectories: bool = True) -> RunResult:
    """Run ``K`` episodes of AQ-UCB from a fresh agent.

    Draws the initial trajectory, then for ``k = 1..K`` updates on trajectory
    ``k - 1``, forms the greedy policy ``pi_k`` and rolls out trajectory ``k``.
    ``on_episode(k, state, pi_k)`` is called after each update, before the
    rollout. ``bonus_fn`` overrides ``sched`` (e.g. :func:`zero_bonus`).
    """
    if bonus_fn is None:
        if sched is None:
            raise ValueError("either sched or bonus_fn is required")
        if sched.H != mdp.horizon:
            raise ValueError(f"schedule horizon {sched.H} != MDP horizon {mdp.horizon}")
        bonus_fn = sched
    if K < 0:
        raise ValueError("K must be nonnegative")
    validate(agg, mdp)
    rng = np.random.default_rng(seed)
    state = AgentState.fresh(mdp.horizon, agg.num_cells)
    traj = initial_trajectory(mdp, rng)
    trajectories = [traj] if keep_trajectories else []
    for k in range(1, K + 1):
        update_from_trajectory(state, traj, agg, bonus_fn)
        pi = agent_greedy_policy(state, agg)
        if on_episode is not None:
            on_episode(k, state, pi)
        traj = rollout(state, mdp, agg, rng, policy=pi)
        if keep_trajectories:
            trajectories.append(traj)
    return RunResult(trajectories, state, agent_greedy_policy(state, agg))


def baseline_greedy_sarsa(mdp: EpisodicMdp, agg: Aggregation, K: int, seed,
                          on_episode: EpisodeHook | None = None,
                          keep_trajectories: bool = True) -> RunResult:
    """The same loop with the optimism bonus switched off."""
    return run_aqucb(mdp, agg, None, K, seed, bonus_fn=zero_bonus, on_episode=on_episode,
                     keep_trajectories=keep_trajectories)


AGENTS = {"aqucb", "greedy_sarsa"}
