"""Seeded experiment sweeps with exact regret and run-time checks.

Regret is exact: the greedy policy of every evaluated episode is scored by
dynamic-programming policy evaluation against the optimal value.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .aggregation import Aggregation, epsilon_of, trivial_aggregation, validate
from .agent import AgentState, BonusSchedule, raw_q, run_aqucb, zero_bonus
from .envs import DuplicationSpec, chain_mdp, expand_aggregate_mdp, random_mdp
from .mdp import EpisodicMdp, backward_induction, policy_value

REGRET_TOL = 1e-10
OPTIMISM_TOL = 1e-10
VISIT_SUM_TOL = 1e-9
DEFAULT_EVAL_BUDGET = 10**8


class ConfigError(ValueError):
    pass


class HarnessError(RuntimeError):
    pass


def theorem_bound(K: int, H: int, M: int, delta: float, epsilon: float = 0.0) -> float:
    """High-probability regret envelope of AQ-UCB after ``K`` episodes."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return (24.0 * math.sqrt(H ** 5 * M * K * math.log(3 * H * K / delta))
            + 12.0 * math.sqrt(2 * H ** 3 * K * math.log(3 / delta))
            + 3.0 * H ** 2 * M
            + 6.0 * epsilon * H * K)


def optimism_violations(state: AgentState, q_star: np.ndarray, agg: Aggregation) -> int:
    """Number of pairs ``(h, s, a)`` whose aggregated estimate is below Q*."""
    H = state.H
    if q_star.shape[0] < H or q_star.shape[1:] != agg.shape[1:]:
        raise ValueError(f"Q* table of shape {q_star.shape} does not match aggregation {agg.shape}")
    if agg.num_cells != state.M or agg.shape[0] != H:
        raise ValueError(f"aggregation with {agg.num_cells} cells does not match agent with {state.M}")
    return int(np.count_nonzero(raw_q(state, agg) < q_star[:H] - OPTIMISM_TOL))


@dataclass
class VisitSumCheck:
    lhs: float
    rhs: float
    ok: bool


def visit_sum_check(state: AgentState, K: int | None = None) -> VisitSumCheck:
    """Deterministic counting inequality on the final visit counts.

    ``sum_h sum_m sum_{j <= N_h(m)} 1/sqrt(j) <= 2 sqrt(H^2 M K)``.
    ``K`` defaults to the number of update passes the state has seen.
    """
    if K is None:
        K = state.episode_index
    n = state.visits.ravel()
    top = int(n.max()) if n.size else 0
    prefix = np.concatenate([[0.0], np.cumsum(1.0 / np.sqrt(np.arange(1, top + 1)))])
    lhs = float(prefix[n].sum())
    rhs = 2.0 * math.sqrt(state.H ** 2 * state.M * K)
    return VisitSumCheck(lhs, rhs, lhs <= rhs + VISIT_SUM_TOL)


@dataclass
class LossCheck:
    tail_mean: float
    threshold: float
    ok: bool


def asymptotic_loss_check(instantaneous: np.ndarray, epsilon: float, H: int, M: int, delta: float,
                          tail_fraction: float = 0.2) -> LossCheck:
    """Compare tail per-episode regret with ``6 eps H`` plus an amortized slack.

    The slack is the leading square-root term of :func:`theorem_bound`
    spread over the tail: ``24 sqrt(H^5 M log(3 H K / delta) / K_tail)``.
    """
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    inst = np.asarray(instantaneous, dtype=float)
    K = inst.size
    k_tail = max(1, int(round(tail_fraction * K)))
    tail_mean = float(inst[-k_tail:].mean())
    slack = 24.0 * math.sqrt(H ** 5 * M * math.log(3 * H * K / delta) / k_tail)
    threshold = 6.0 * epsilon * H + slack
    return LossCheck(tail_mean, threshold, tail_mean <= threshold)


# -- configuration ---------------------------------------------------------

GENERATORS = ("chain", "random", "duplication")


def _scalar(v):
    if not isinstance(v, str):
        return v
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


@dataclass
class ExperimentConfig:
    """One sweep: an environment, an aggregation, an agent and a seed list.

    ``environment`` holds ``generator`` plus its parameters, or ``file``.
    ``aggregation`` holds ``kind`` (``natural``, ``trivial`` or ``file``) and
    ``path`` for files. ``epsilon`` is a number or ``"auto"`` (measured).
    ``stride`` of ``None`` picks 1 for ``K <= 10**4`` and 10 above.
    """

    environment: dict
    aggregation: dict = field(default_factory=lambda: {"kind": "natural"})
    agent: str = "aqucb"
    K: int = 1000
    delta: float = 0.1
    epsilon: float | str = "auto"
    seeds: list = field(default_factory=lambda: [0])
    stride: int | None = None
    monitor_optimism: bool | str = "auto"
    workers: int = 1
    eval_budget: int = DEFAULT_EVAL_BUDGET

    def __post_init__(self):
        # text and typed configs must echo identically
        self.environment = {k: _scalar(v) for k, v in self.environment.items()}
        self.aggregation = {k: _scalar(v) for k, v in self.aggregation.items()}
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.stride is not None and self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.agent not in ("aqucb", "greedy_sarsa"):
            raise ConfigError(f"unknown agent {self.agent!r}")
        if self.epsilon != "auto":
            try:
                self.epsilon = float(self.epsilon)
            except (TypeError, ValueError):
                raise ConfigError(f"epsilon must be a number or 'auto', got {self.epsilon!r}") from None
            if self.epsilon < 0:
                raise ConfigError("epsilon must be nonnegative")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if "generator" not in self.environment and "file" not in self.environment:
            raise ConfigError("environment needs a 'generator' or a 'file'")
        gen = self.environment.get("generator")
        if gen is not None and gen not in GENERATORS:
            raise ConfigError(f"unknown generator {gen!r}; expected one of {GENERATORS}")

    @property
    def effective_stride(self) -> int:
        if self.stride is not None:
            return self.stride
        return 1 if self.K <= 10**4 else 10

    def to_dict(self) -> dict:
        return asdict(self)


def _num(params: dict, key: str, cast, default=None):
    if key not in params:
        if default is None:
            raise ConfigError(f"environment parameter {key!r} is required")
        return default
    try:
        return cast(params[key])
    except (TypeError, ValueError):
        raise ConfigError(f"environment parameter {key!r} has invalid value {params[key]!r}") from None


def _opt_int(v):
    return None if v in (None, "", "none", "None") else int(v)


def build_environment(env: dict) -> tuple[EpisodicMdp, Aggregation | None]:
    """Instantiate an MDP (and its natural aggregation, if any) from a config dict.

    Generators and parameters:
        chain: H, L, p
        random: H, S, A, sparsity, seed, reward_low, reward_high
        duplication: the random parameters (with S the latent state count)
            plus copies, eta, perturb_seed
    """
    if "file" in env:
        return EpisodicMdp.load(env["file"]), None
    gen = env.get("generator")
    if gen == "chain":
        return chain_mdp(_num(env, "H", int), _num(env, "L", int), _num(env, "p", float, 0.0)), None
    if gen in ("random", "duplication"):
        base = random_mdp(_num(env, "H", int), _num(env, "S", int), _num(env, "A", int),
                          sparsity=_opt_int(env.get("sparsity")), seed=_num(env, "seed", int, 0),
                          reward_range=(_num(env, "reward_low", float, 0.0),
                                        _num(env, "reward_high", float, 1.0)))
        if gen == "random":
            return base, None
        spec = DuplicationSpec(base, _num(env, "copies", int, 1), _num(env, "eta", float, 0.0),
                               _num(env, "perturb_seed", int, 0))
        mdp, agg, _ = expand_aggregate_mdp(spec)
        return mdp, agg
    raise ConfigError(f"unknown generator {gen!r}")


def build_instance(cfg: ExperimentConfig) -> tuple[EpisodicMdp, Aggregation]:
    mdp, natural = build_environment(cfg.environment)
    kind = cfg.aggregation.get("kind", "natural")
    if kind == "trivial":
        agg = trivial_aggregation(*mdp.shape)
    elif kind == "file":
        if "path" not in cfg.aggregation:
            raise ConfigError("aggregation kind 'file' needs a 'path'")
        agg = Aggregation.load(cfg.aggregation["path"])
    elif kind == "natural":
        agg = natural if natural is not None else trivial_aggregation(*mdp.shape)
    else:
        raise ConfigError(f"unknown aggregation kind {kind!r}")
    validate(agg, mdp)
    return mdp, agg


# -- runs ------------------------------------------------------------------

@dataclass
class RegretLedger:
    seed: int
    instantaneous: np.ndarray
    evaluated: np.ndarray
    optimism_checked: int = 0
    optimism_violations: int = 0
    first_violation_episode: int | None = None
    visit_sum: VisitSumCheck | None = None
    final_state: AgentState | None = None
    policy_snapshots: dict = field(default_factory=dict)

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.instantaneous)

    @property
    def regret(self) -> float:
        return float(self.instantaneous.sum())

    @property
    def optimistic(self) -> bool:
        return self.optimism_violations == 0


def run_seed(mdp: EpisodicMdp, agg: Aggregation, K: int, seed: int, *, agent: str = "aqucb",
             sched: BonusSchedule | None = None, bonus_fn=None, q_star: np.ndarray | None = None,
             v_star: np.ndarray | None = None, stride: int = 1, monitor_optimism: bool = False,
             snapshot_stride: int | None = None) -> RegretLedger:
    """One seeded run with exact per-episode regret of the executed greedy policies.

    Episodes ``k`` with ``(k - 1) % stride == 0`` and the last episode are
    evaluated exactly; the others hold the last evaluated value.
    """
    if q_star is None or v_star is None:
        q_star, v_star = backward_induction(mdp)
    v_opt = float(v_star[0, mdp.initial_state])
    inst = np.zeros(K)
    evaluated = np.zeros(K, dtype=bool)
    cache: dict[bytes, float] = {}
    ledger = RegretLedger(seed, inst, evaluated)
    last = [0.0]

    def hook(k, state, pi):
        if (k - 1) % stride == 0 or k == K:
            key = pi.tobytes()
            v = cache.get(key)
            if v is None:
                v = cache[key] = float(policy_value(mdp, pi)[0, mdp.initial_state])
            last[0] = v_opt - v
            evaluated[k - 1] = True
            if monitor_optimism:
                bad = optimism_violations(state, q_star, agg)
                ledger.optimism_checked += 1
                if bad:
                    ledger.optimism_violations += bad
                    if ledger.first_violation_episode is None:
                        ledger.first_violation_episode = k
        inst[k - 1] = last[0]
        if snapshot_stride and k % snapshot_stride == 0:
            ledger.policy_snapshots[k] = pi.copy()

    if agent == "greedy_sarsa":
        bonus_fn = zero_bonus
    res = run_aqucb(mdp, agg, sched, K, seed, bonus_fn=bonus_fn, on_episode=hook,
                    keep_trajectories=False)
    if np.any(inst < -REGRET_TOL):
        raise HarnessError(f"negative regret {inst.min()!r} in seed {seed}; V* does not dominate V^pi")
    ledger.final_state = res.state
    ledger.visit_sum = visit_sum_check(res.state, K)
    return ledger


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    ledgers: list[RegretLedger]
    summary: dict
    timing: dict


def _run_one(args):
    mdp, agg, cfg, sched, q_star, v_star, monitor, seed = args
    t0 = time.perf_counter()
    ledger = run_seed(mdp, agg, cfg.K, seed, agent=cfg.agent, sched=sched, q_star=q_star,
                      v_star=v_star, stride=cfg.effective_stride, monitor_optimism=monitor)
    return ledger, time.perf_counter() - t0


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    mdp, agg = build_instance(cfg)
    H, S, A = mdp.shape
    if S * S * A * H > cfg.eval_budget:
        raise HarnessError(f"exact evaluation cost S*S*A*H = {S * S * A * H} exceeds budget {cfg.eval_budget}")
    q_star, v_star = backward_induction(mdp)
    measured = epsilon_of(mdp, agg, q_star)
    eps = measured if cfg.epsilon == "auto" else float(cfg.epsilon)
    sched = BonusSchedule(H, cfg.K, cfg.delta, eps)
    monitor = cfg.monitor_optimism
    if monitor == "auto":
        monitor = measured <= OPTIMISM_TOL
    jobs = [(mdp, agg, cfg, sched, q_star, v_star, bool(monitor), int(s)) for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(j) for j in jobs]
    ledgers = [o[0] for o in outcomes]

    bound = theorem_bound(cfg.K, H, agg.num_cells, cfg.delta, eps)
    regrets = [lg.regret for lg in ledgers]
    summary = {
        "config": cfg.to_dict(),
        "instance": {"horizon": H, "num_states": S, "num_actions": A, "num_cells": agg.num_cells,
                     "optimal_value": float(v_star[0, mdp.initial_state])},
        "measured_epsilon": measured,
        "schedule_epsilon": eps,
        "stride": cfg.effective_stride,
        "theorem_bound": bound,
        "final_regret": {str(lg.seed): lg.regret for lg in ledgers},
        "mean_final_regret": float(np.mean(regrets)),
        "runs_below_bound": int(sum(r <= bound for r in regrets)),
        "optimism_monitored": bool(monitor),
        "optimism_frequency": (float(np.mean([lg.optimistic for lg in ledgers])) if monitor else None),
        "visit_sum_check": {str(lg.seed): asdict(lg.visit_sum) for lg in ledgers},
        "visit_sum_ok": all(lg.visit_sum.ok for lg in ledgers),
    }
    timing = {"total_seconds": time.perf_counter() - t0,
              "per_seed_seconds": {str(lg.seed): o[1] for lg, o in zip(ledgers, outcomes)}}
    return ExperimentResult(cfg, ledgers, summary, timing)


# -- outputs ---------------------------------------------------------------

CSV_FIELDS = ("seed", "k", "instantaneous_regret", "cumulative_regret", "evaluated")


def ledger_csv(ledgers: list[RegretLedger]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for lg in ledgers:
        cum = lg.cumulative
        for k in range(lg.instantaneous.size):
            w.writerow((lg.seed, k + 1, repr(float(lg.instantaneous[k])), repr(float(cum[k])),
                        "true" if lg.evaluated[k] else "false"))
    return buf.getvalue()


def read_regret_csv(path) -> dict[int, dict[str, np.ndarray]]:
    """Parse a regret CSV into ``{seed: {"k": ..., "cumulative_regret": ..., ...}}``."""
    rows: dict[int, list] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_FIELDS:
            raise ValueError(f"{path}: expected columns {CSV_FIELDS}, got {reader.fieldnames}")
        for row in reader:
            rows.setdefault(int(row["seed"]), []).append(row)
    out = {}
    for seed, rs in rows.items():
        out[seed] = {
            "k": np.array([int(r["k"]) for r in rs]),
            "instantaneous_regret": np.array([float(r["instantaneous_regret"]) for r in rs]),
            "cumulative_regret": np.array([float(r["cumulative_regret"]) for r in rs]),
            "evaluated": np.array([r["evaluated"] == "true" for r in rs]),
        }
    return out


def write_outputs(result: ExperimentResult, out_dir, stem: str = "regret") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{stem}.csv", "summary": out / "summary.json", "timing": out / "timing.json"}
    paths["csv"].write_text(ledger_csv(result.ledgers))
    paths["summary"].write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    paths["timing"].write_text(json.dumps(result.timing, indent=2, sort_keys=True) + "\n")
    return paths
