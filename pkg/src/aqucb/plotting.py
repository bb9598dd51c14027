"""Static SVG plots of cumulative regret curves."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import read_regret_csv, theorem_bound  # noqa: E402


class PlotError(ValueError):
    pass


def load_curves(csv_paths) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Return ``(label, k, cumulative regret of shape (seeds, K))`` per file."""
    curves = []
    for p in csv_paths:
        data = read_regret_csv(p)
        if not data:
            raise PlotError(f"{p}: no rows")
        ks = {len(d["k"]) for d in data.values()}
        if len(ks) != 1:
            raise PlotError(f"{p}: seeds have different episode counts {sorted(ks)}")
        seeds = sorted(data)
        k = data[seeds[0]]["k"]
        cum = np.stack([data[s]["cumulative_regret"] for s in seeds])
        curves.append((Path(p).stem, k, cum))
    if not curves:
        raise PlotError("no input CSV files")
    lengths = {len(c[1]) for c in curves}
    if len(lengths) > 1:
        desc = ", ".join(f"{Path(p)} (K={len(c[1])})" for p, c in zip(csv_paths, curves))
        raise PlotError(f"inputs disagree on K: {desc}")
    return curves


def plot_regret(csv_paths, out_path, summary: dict | None = None, overlay_bound: bool = False) -> Path:
    """Mean cumulative regret per file with a min/max band across seeds.

    With ``overlay_bound`` the regret envelope is drawn from the instance
    parameters recorded in ``summary``.
    """
    curves = load_curves(list(csv_paths))
    plt.rcParams["svg.hashsalt"] = "aqucb"
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, k, cum in curves:
        line, = ax.plot(k, cum.mean(axis=0), lw=1.5, label=f"{label} (mean of {cum.shape[0]})")
        if cum.shape[0] > 1:
            ax.fill_between(k, cum.min(axis=0), cum.max(axis=0), color=line.get_color(), alpha=0.25, lw=0)
    if overlay_bound:
        if summary is None:
            raise PlotError("bound overlay needs a summary JSON")
        inst, cfg = summary["instance"], summary["config"]
        k = curves[0][1]
        bound = [theorem_bound(int(x), inst["horizon"], inst["num_cells"], cfg["delta"],
                               summary["schedule_epsilon"]) for x in k]
        ax.plot(k, bound, "k--", lw=1.0, label="regret bound")
        ax.set_yscale("log")
    ax.set_xlabel("episode k")
    ax.set_ylabel("cumulative regret")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
