"""Benchmark generators: chains, random MDPs and duplicated-state expansions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregation import Aggregation, epsilon_of
from .mdp import EpisodicMdp, MdpError

LEFT, RIGHT = 0, 1


def chain_mdp(H: int, L: int, p: float = 0.0) -> EpisodicMdp:
    """Chain of ``L`` states starting at state 0.

    Action 0 moves left (floored at 0), action 1 moves right with probability
    ``1 - p`` and otherwise stays put. Only "right" at the last state pays 1.
    Because ties go to the lowest action, a fresh greedy agent walks left.
    """
    if L < 2:
        raise MdpError(f"chain length must be >= 2, got {L}")
    if not 0.0 <= p < 0.5:
        raise MdpError(f"slip probability must lie in [0, 0.5), got {p}")
    P = np.zeros((H - 1, L, 2, L))
    for s in range(L):
        P[:, s, LEFT, max(s - 1, 0)] = 1.0
        P[:, s, RIGHT, min(s + 1, L - 1)] += 1.0 - p
        P[:, s, RIGHT, s] += p
    R = np.zeros((H, L, 2))
    R[:, L - 1, RIGHT] = 1.0
    return EpisodicMdp(H, L, 2, 0, P, R)


def random_mdp(H: int, S: int, A: int, sparsity: int | None = None, seed=0,
               reward_range: tuple[float, float] = (0.0, 1.0)) -> EpisodicMdp:
    """Random kernels (normalized exponential draws) and uniform mean rewards.

    ``sparsity`` is the support size of each transition row (``None`` or
    ``>= S`` keeps the full support; ``1`` gives a deterministic kernel).
    """
    rng = np.random.default_rng(seed)
    P = rng.exponential(size=(H - 1, S, A, S))
    if sparsity is not None and sparsity < S:
        if sparsity < 1:
            raise MdpError("sparsity must be at least 1")
        keep = np.argsort(rng.random(P.shape), axis=-1)[..., :sparsity]
        mask = np.zeros(P.shape, dtype=bool)
        np.put_along_axis(mask, keep, True, axis=-1)
        P = np.where(mask, P, 0.0)
    P = P / P.sum(axis=-1, keepdims=True)
    lo, hi = reward_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise MdpError(f"reward range {reward_range} must sit inside [0, 1]")
    R = lo + (hi - lo) * rng.random((H, S, A))
    return EpisodicMdp(H, S, A, 0, P, R)


@dataclass(frozen=True, eq=False)
class DuplicationSpec:
    base_mdp: EpisodicMdp
    copies: int = 1
    reward_perturbation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.copies < 1:
            raise MdpError("copies must be >= 1")
        if self.reward_perturbation < 0:
            raise MdpError("reward perturbation must be nonnegative")


def expand_aggregate_mdp(spec: DuplicationSpec) -> tuple[EpisodicMdp, Aggregation, float]:
    """Replace each latent state by ``copies`` exchangeable copies.

    Copy ``i`` of latent state ``s`` is state ``s * copies + i``. Successor
    mass is split evenly over the copies of the latent successor, and every
    copy's reward means get an independent uniform shift in ``[-eta, eta]``.
    The returned aggregation sends ``(copy of s, a)`` to cell ``s * A + a``,
    and the returned epsilon is measured on the expanded MDP.
    """
    base, c, eta = spec.base_mdp, spec.copies, spec.reward_perturbation
    H, S0, A = base.shape
    S = S0 * c
    P = np.repeat(np.repeat(base.transitions, c, axis=1), c, axis=3) / c
    R = np.repeat(base.rewards, c, axis=1)
    W = np.repeat(base.reward_noise, c, axis=1)
    if eta > 0:
        rng = np.random.default_rng(spec.seed)
        R = R + rng.uniform(-eta, eta, size=R.shape)
    if np.any(R - W < 0) or np.any(R + W > 1):
        raise MdpError(
            f"reward perturbation {eta} pushes rewards outside [0, 1]; shrink it or narrow the base reward range")
    mdp = EpisodicMdp(H, S, A, base.initial_state * c, P, R, W)
    latent = np.arange(S) // c
    cells = latent[:, None] * A + np.arange(A)[None, :]
    agg = Aggregation(S0 * A, np.broadcast_to(cells, (H, S, A)))
    return mdp, agg, epsilon_of(mdp, agg)
