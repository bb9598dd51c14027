"""Per-stage aggregation maps over state-action pairs and their error."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mdp import EpisodicMdp, backward_induction


class AggregationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Aggregation:
    """Cell index ``maps[h, s, a]`` in ``range(num_cells)`` for every stage.

    Cells unused at some stage are allowed.
    """

    num_cells: int
    maps: np.ndarray

    def __post_init__(self):
        maps = np.array(self.maps)
        if maps.ndim != 3:
            raise AggregationError(f"maps must be 3-d (H, S, A), got shape {maps.shape}")
        if maps.size and not np.issubdtype(maps.dtype, np.integer):
            if not np.all(maps == np.round(maps)):
                raise AggregationError("cell indices must be integers")
        maps = maps.astype(np.int64)
        maps.setflags(write=False)
        object.__setattr__(self, "maps", maps)
        if self.num_cells < 1:
            raise AggregationError("num_cells must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.maps.shape)

    def to_dict(self) -> dict:
        return {"num_cells": self.num_cells, "maps": self.maps.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Aggregation":
        try:
            return cls(int(d["num_cells"]), np.array(d["maps"]))
        except KeyError as exc:
            raise AggregationError(f"missing field {exc.args[0]!r} in aggregation document") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "Aggregation":
        return cls.from_dict(json.loads(Path(path).read_text()))


def trivial_aggregation(H: int, S: int, A: int) -> Aggregation:
    """Each state-action pair in its own cell: ``phi_h(s, a) = s * A + a``."""
    cells = np.arange(S * A).reshape(S, A)
    return Aggregation(S * A, np.broadcast_to(cells, (H, S, A)))


def validate(agg: Aggregation, mdp: EpisodicMdp) -> np.ndarray:
    """Check ``agg`` against ``mdp`` and return cell occupancy, shape ``(H, M)``.

    Raises :class:`AggregationError` naming the first offending ``(h, s, a)``.
    """
    if agg.shape != mdp.shape:
        raise AggregationError(f"aggregation shape {agg.shape} does not match MDP shape {mdp.shape}")
    bad = (agg.maps < 0) | (agg.maps >= agg.num_cells)
    if np.any(bad):
        h, s, a = np.argwhere(bad)[0]
        raise AggregationError(
            f"cell index {agg.maps[h, s, a]} at (h={h}, s={s}, a={a}) outside [0, {agg.num_cells})")
    H = mdp.horizon
    return np.stack([np.bincount(agg.maps[h].ravel(), minlength=agg.num_cells) for h in range(H)])


def cell_spans(q_star: np.ndarray, agg: Aggregation) -> np.ndarray:
    """Per-(stage, cell) spread ``max - min`` of Q* inside each cell; 0 if empty."""
    H = agg.maps.shape[0]
    M = agg.num_cells
    spans = np.zeros((H, M))
    for h in range(H):
        cells = agg.maps[h].ravel()
        vals = q_star[h].ravel()
        hi = np.full(M, -np.inf)
        lo = np.full(M, np.inf)
        np.maximum.at(hi, cells, vals)
        np.minimum.at(lo, cells, vals)
        used = np.isfinite(hi)
        spans[h, used] = hi[used] - lo[used]
    return spans


def epsilon_of(mdp: EpisodicMdp, agg: Aggregation, q_star: np.ndarray | None = None) -> float:
    """Smallest eps for which ``agg`` is an eps-error aggregation of ``mdp``.

    The largest gap between optimal Q-values of two pairs sharing a cell,
    over all stages. ``q_star`` may be passed to reuse a prior solve.
    """
    validate(agg, mdp)
    if q_star is None:
        q_star, _ = backward_induction(mdp)
    return float(cell_spans(q_star, agg).max())
