"""Command-line front end: ``aqucb {run,gen,solve,inspect,plot}``.

Exit codes: 0 success, 1 run failure, 2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .aggregation import Aggregation, AggregationError, epsilon_of, trivial_aggregation, validate
from .harness import ConfigError, ExperimentConfig, build_environment, run_experiment, write_outputs
from .mdp import EpisodicMdp, MdpError, backward_induction

log = logging.getLogger("aqucb")

SECTIONS = ("environment", "aggregation", "agent", "harness", "output")
# config key -> ExperimentConfig field
AGENT_KEYS = {"name": "agent", "K": "K", "delta": "delta", "epsilon": "epsilon"}
HARNESS_KEYS = {"seeds": "seeds", "stride": "stride", "monitor_optimism": "monitor_optimism",
                "workers": "workers", "eval_budget": "eval_budget"}


class UsageError(Exception):
    pass


def read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as f:
            cp.read_file(f)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise UsageError(f"{path}: unknown section [{sec}]; expected {', '.join(SECTIONS)}")
    return cp


def config_from_echo(path) -> configparser.ConfigParser:
    """Rebuild an INI-style config from a summary JSON config echo."""
    try:
        echo = json.loads(Path(path).read_text())["config"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"{path}: not a summary JSON with a config echo ({exc})") from None
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["environment"] = {k: _fmt(v) for k, v in echo["environment"].items()}
    cp["aggregation"] = {k: _fmt(v) for k, v in echo["aggregation"].items()}
    cp["agent"] = {key: _fmt(echo[f]) for key, f in AGENT_KEYS.items()}
    cp["harness"] = {key: _fmt(echo[f]) for key, f in HARNESS_KEYS.items()}
    return cp


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def apply_overrides(cp: configparser.ConfigParser, overrides: list[str]) -> None:
    """Apply ``KEY=VALUE`` or ``section.KEY=VALUE`` overrides in place.

    A bare key must already exist in exactly one section.
    """
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not KEY=VALUE")
        key, value = item.split("=", 1)
        key, value = key.strip(), value.strip()
        if "." in key:
            sec, key = key.split(".", 1)
            if sec not in SECTIONS:
                raise UsageError(f"override {item!r}: unknown section {sec!r}")
        else:
            hits = [s for s in cp.sections() if key in cp[s]]
            if len(hits) != 1:
                where = "no section" if not hits else f"sections {hits}"
                raise UsageError(f"override {item!r}: key found in {where}; use section.{key}=...")
            sec = hits[0]
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp[sec][key] = value


def _parse_value(sec, key, raw, cast):
    if raw is None or raw == "":
        return None
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"[{sec}] {key}: invalid value {raw!r}") from None


def _seeds(raw: str) -> list[int]:
    seeds = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def _bool_or_auto(raw: str):
    low = raw.lower()
    if low == "auto":
        return "auto"
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(raw)


def experiment_config(cp: configparser.ConfigParser) -> ExperimentConfig:
    if not cp.has_section("environment"):
        raise UsageError("config is missing the [environment] section")
    env = dict(cp["environment"])
    agg = dict(cp["aggregation"]) if cp.has_section("aggregation") else {"kind": "natural"}
    agent = dict(cp["agent"]) if cp.has_section("agent") else {}
    harness = dict(cp["harness"]) if cp.has_section("harness") else {}
    for sec, known, given in (("agent", AGENT_KEYS, agent), ("harness", HARNESS_KEYS, harness)):
        for key in given:
            if key not in known:
                raise UsageError(f"[{sec}] unknown key {key!r}")
    kwargs = {"environment": env, "aggregation": agg}
    casts = {"name": str, "K": int, "delta": float, "epsilon": str, "seeds": _seeds, "stride": int,
             "monitor_optimism": _bool_or_auto, "workers": int, "eval_budget": int}
    for sec, keys, given in (("agent", AGENT_KEYS, agent), ("harness", HARNESS_KEYS, harness)):
        for key, fld in keys.items():
            if key in given:
                val = _parse_value(sec, key, given[key], casts[key])
                if val is not None or fld == "stride":
                    kwargs[fld] = val
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def cmd_run(args) -> int:
    src = Path(args.config)
    cp = config_from_echo(src) if src.suffix == ".json" else read_config(src)
    apply_overrides(cp, args.set)
    if args.seeds:
        apply_overrides(cp, [f"harness.seeds={args.seeds}"])
    cfg = experiment_config(cp)
    out = args.out or (cp["output"].get("dir") if cp.has_section("output") else None) or "."
    stem = cp["output"].get("stem", "regret") if cp.has_section("output") else "regret"
    try:
        result = run_experiment(cfg)
    except (ConfigError, MdpError, AggregationError) as exc:
        raise UsageError(str(exc)) from None
    paths = write_outputs(result, out, stem=stem)
    s = result.summary
    log.info("mean regret %.4f over %d seeds (bound %.1f); wrote %s",
             s["mean_final_regret"], len(cfg.seeds), s["theorem_bound"], paths["csv"])
    if not s["visit_sum_ok"]:
        log.error("visit-count inequality failed: %s", s["visit_sum_check"])
        return 1
    return 0


def cmd_gen(args) -> int:
    params = {"generator": args.generator}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"parameter {item!r} is not KEY=VALUE")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    try:
        mdp, natural = build_environment(params)
    except (ConfigError, MdpError) as exc:
        raise UsageError(str(exc)) from None
    agg = natural if natural is not None else trivial_aggregation(*mdp.shape)
    eps = epsilon_of(mdp, agg)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    mdp.save(out / "mdp.json")
    agg.save(out / "aggregation.json")
    (out / "epsilon.json").write_text(json.dumps({"generator": params, "measured_epsilon": eps},
                                                 indent=2, sort_keys=True) + "\n")
    log.info("wrote %s (S=%d, M=%d, epsilon=%.3g)", out / "mdp.json", mdp.num_states, agg.num_cells, eps)
    return 0


def _load_mdp(path) -> EpisodicMdp:
    try:
        return EpisodicMdp.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except (ValueError, MdpError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_solve(args) -> int:
    mdp = _load_mdp(args.mdp)
    Q, V = backward_induction(mdp)
    v1 = float(V[0, mdp.initial_state])
    doc = {"q_star": Q[: mdp.horizon].tolist(), "v_star": V[: mdp.horizon].tolist(),
           "optimal_value": v1, "initial_state": mdp.initial_state}
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "solution.json").write_text(json.dumps(doc) + "\n")
    print(repr(v1))
    return 0


def cmd_inspect(args) -> int:
    mdp = _load_mdp(args.mdp)
    H, S, A = mdp.shape
    Q, V = backward_induction(mdp)
    print(f"horizon={H} states={S} actions={A} initial_state={mdp.initial_state}")
    print(f"optimal_value={V[0, mdp.initial_state]!r}")
    print(f"stochastic_rewards={bool(np.any(mdp.reward_noise > 0))}")
    if args.aggregation:
        try:
            agg = Aggregation.load(args.aggregation)
            occupancy = validate(agg, mdp)
        except (OSError, ValueError) as exc:
            raise UsageError(f"{args.aggregation}: {exc}") from None
        print(f"cells={agg.num_cells} epsilon={epsilon_of(mdp, agg, Q)!r}")
        for h, row in enumerate(occupancy):
            print(f"stage {h + 1} occupancy: {' '.join(map(str, row.tolist()))}")
    return 0


def cmd_plot(args) -> int:
    from .plotting import PlotError, plot_regret

    summary = None
    if args.summary:
        try:
            summary = json.loads(Path(args.summary).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read summary {args.summary}: {exc}") from None
    try:
        out = plot_regret(args.csv, args.out or "regret.svg", summary=summary, overlay_bound=args.bound)
    except (PlotError, OSError) as exc:
        raise UsageError(str(exc)) from None
    log.info("wrote %s", out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aqucb", description=__doc__.splitlines()[0])
    p.add_argument("--quiet", action="store_true", help="only log errors")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment sweep")
    r.add_argument("--config", required=True, help="INI config, or a summary.json to rerun")
    r.add_argument("--out", help="output directory (overrides [output] dir)")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
    r.add_argument("--seeds", help="comma list of seeds, ranges as a..b")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen", help="generate an MDP and aggregation")
    g.add_argument("generator", choices=("chain", "random", "duplication"))
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="generator parameter")
    g.add_argument("--out", help="output directory")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="optimal values by backward induction")
    s.add_argument("mdp")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_solve)

    i = sub.add_parser("inspect", help="describe an MDP and optional aggregation")
    i.add_argument("mdp")
    i.add_argument("--aggregation")
    i.set_defaults(func=cmd_inspect)

    pl = sub.add_parser("plot", help="cumulative regret SVG")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--summary", help="summary.json for the bound overlay")
    pl.add_argument("--bound", action="store_true", help="overlay the regret bound")
    pl.add_argument("--out", help="SVG path")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return 2
    except (MdpError, AggregationError) as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.error("run failed: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
