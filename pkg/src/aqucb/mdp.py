"""Finite-horizon episodic MDPs and exact dynamic-programming solvers.

Stages are 0-indexed internally: stage ``h`` in ``range(H)`` corresponds to
stage ``h + 1`` in the usual 1-indexed notation. Value tables carry an
explicit terminal row of zeros at index ``H``.

Array layout:
    transitions  (H - 1, S, A, S)
    rewards      (H, S, A)       mean rewards in [0, 1]
    reward_noise (H, S, A)       uniform noise half-width
    Q tables     (H + 1, S, A)
    V tables     (H + 1, S)
    policies     (H, S)          int action indices
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-12
DEFAULT_ENUMERATION_CAP = 10**6


class MdpError(ValueError):
    """Raised for malformed MDPs or invalid queries against one."""


@dataclass(frozen=True, eq=False)
class EpisodicMdp:
    horizon: int
    num_states: int
    num_actions: int
    initial_state: int
    transitions: np.ndarray
    rewards: np.ndarray
    reward_noise: np.ndarray | None = None

    def __post_init__(self):
        H, S, A = self.horizon, self.num_states, self.num_actions
        if H < 1 or S < 1 or A < 1:
            raise MdpError(f"horizon, num_states, num_actions must be positive, got {(H, S, A)}")
        if not 0 <= self.initial_state < S:
            raise MdpError(f"initial_state {self.initial_state} out of range for S={S}")

        P = np.array(self.transitions, dtype=float)
        if P.size == 0:
            P = P.reshape(H - 1, S, A, S)
        if P.shape != (H - 1, S, A, S):
            raise MdpError(f"transitions must have shape {(H - 1, S, A, S)}, got {P.shape}")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise MdpError("transition probabilities must be finite and nonnegative")
        sums = P.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            h, s, a = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
            raise MdpError(f"transition row (h={h}, s={s}, a={a}) sums to {sums[h, s, a]!r}")
        P = P / sums[..., None]

        R = np.array(self.rewards, dtype=float)
        if R.shape != (H, S, A):
            raise MdpError(f"rewards must have shape {(H, S, A)}, got {R.shape}")
        if np.any(R < 0) or np.any(R > 1) or not np.all(np.isfinite(R)):
            raise MdpError("mean rewards must lie in [0, 1]")

        if self.reward_noise is None:
            W = np.zeros_like(R)
        else:
            W = np.broadcast_to(np.array(self.reward_noise, dtype=float), R.shape).copy()
        if np.any(W < 0):
            raise MdpError("reward noise half-widths must be nonnegative")
        if np.any(R - W < 0) or np.any(R + W > 1):
            raise MdpError("reward mean +/- noise half-width must stay inside [0, 1]")

        for arr in (P, R, W):
            arr.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", R)
        object.__setattr__(self, "reward_noise", W)
        # cumulative rows for inverse-CDF sampling
        cdf = np.cumsum(P, axis=-1)
        if cdf.size:
            # zero-mass tail successors must be unreachable despite round-off
            last = S - 1 - np.argmax(P[..., ::-1] > 0, axis=-1)
            cdf[np.arange(S) >= last[..., None]] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.horizon, self.num_states, self.num_actions

    def to_dict(self) -> dict:
        d = {
            "horizon": self.horizon,
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "initial_state": self.initial_state,
            "transitions": self.transitions.tolist(),
            "rewards": self.rewards.tolist(),
        }
        if np.any(self.reward_noise > 0):
            d["reward_noise"] = self.reward_noise.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodicMdp":
        try:
            H, S, A = int(d["horizon"]), int(d["num_states"]), int(d["num_actions"])
            P = np.array(d["transitions"], dtype=float)
            if P.size == 0:
                P = P.reshape(max(H - 1, 0), S, A, S)
            return cls(H, S, A, int(d["initial_state"]), P,
                       np.array(d["rewards"], dtype=float), d.get("reward_noise"))
        except KeyError as exc:
            raise MdpError(f"missing field {exc.args[0]!r} in MDP document") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "EpisodicMdp":
        return cls.from_dict(json.loads(Path(path).read_text()))


def backward_induction(mdp: EpisodicMdp) -> tuple[np.ndarray, np.ndarray]:
    """Exact optimal Q* and V* by backward recursion.

    Returns ``(Q, V)`` with shapes ``(H + 1, S, A)`` and ``(H + 1, S)``;
    the stage-``H`` rows are identically zero.
    """
    H, S, A = mdp.shape
    Q = np.zeros((H + 1, S, A))
    V = np.zeros((H + 1, S))
    Q[H - 1] = mdp.rewards[H - 1]
    V[H - 1] = Q[H - 1].max(axis=1)
    for h in range(H - 2, -1, -1):
        Q[h] = mdp.rewards[h] + mdp.transitions[h] @ V[h + 1]
        V[h] = Q[h].max(axis=1)
    return Q, V


def _check_policy(mdp: EpisodicMdp, policy: np.ndarray) -> np.ndarray:
    pi = np.asarray(policy)
    H, S, A = mdp.shape
    if pi.shape != (H, S):
        raise MdpError(f"policy must have shape {(H, S)}, got {pi.shape}")
    if not np.issubdtype(pi.dtype, np.integer):
        raise MdpError("policy entries must be integer action indices")
    if np.any(pi < 0) or np.any(pi >= A):
        h, s = np.argwhere((pi < 0) | (pi >= A))[0]
        raise MdpError(f"invalid action {pi[h, s]} at (h={h}, s={s}) for A={A}")
    return pi


def policy_value(mdp: EpisodicMdp, policy: np.ndarray) -> np.ndarray:
    """Exact value table V^pi, shape ``(H + 1, S)``, of a deterministic policy."""
    pi = _check_policy(mdp, policy)
    H, S, _ = mdp.shape
    states = np.arange(S)
    V = np.zeros((H + 1, S))
    V[H - 1] = mdp.rewards[H - 1, states, pi[H - 1]]
    for h in range(H - 2, -1, -1):
        a = pi[h]
        V[h] = mdp.rewards[h, states, a] + mdp.transitions[h, states, a] @ V[h + 1]
    return V


def greedy_policy(q: np.ndarray) -> np.ndarray:
    """Argmax over the last axis with lowest-index tie-breaking.

    ``q`` is a ``(H, S, A)`` table of values per raw pair; slice off the
    terminal row of a backward-induction table before calling.
    """
    return np.argmax(np.asarray(q), axis=-1)


def sample_transition(mdp: EpisodicMdp, h: int, s: int, a: int, rng: np.random.Generator,
                      next_state: bool = True) -> tuple[int | None, float]:
    """Draw ``(next_state, reward)`` for taking ``a`` in ``s`` at stage ``h``.

    The successor is drawn first (inverse CDF on one uniform), then the reward
    noise if the half-width at ``(h, s, a)`` is positive. At the last stage
    pass ``next_state=False``; the returned successor is then ``None``.
    """
    if next_state:
        if h >= mdp.horizon - 1:
            raise MdpError(f"stage {h} is terminal; there is no successor state")
        s_next = int(np.searchsorted(mdp._cdf[h, s, a], rng.random(), side="right"))
        s_next = min(s_next, mdp.num_states - 1)
    else:
        s_next = None
    r = float(mdp.rewards[h, s, a])
    w = mdp.reward_noise[h, s, a]
    if w > 0:
        r += float(rng.uniform(-w, w))
    return s_next, r


def enumerate_policies(mdp: EpisodicMdp, cap: int = DEFAULT_ENUMERATION_CAP) -> tuple[float, np.ndarray]:
    """Brute-force maximum of V^pi_1(s1) over every deterministic policy.

    Test oracle for :func:`backward_induction`; only usable on tiny instances.
    """
    H, S, A = mdp.shape
    n_slots = H * S
    if A ** n_slots > cap:
        raise MdpError(f"{A}^{n_slots} policies exceeds enumeration cap {cap}")
    best_value, best = -np.inf, None
    for flat in itertools.product(range(A), repeat=n_slots):
        pi = np.array(flat, dtype=np.int64).reshape(H, S)
        v = policy_value(mdp, pi)[0, mdp.initial_state]
        if v > best_value:
            best_value, best = v, pi
    return float(best_value), best
