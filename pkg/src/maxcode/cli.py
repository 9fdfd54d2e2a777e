"""``maxcode`` command line: run, report, extract-values, replay."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .agents import ChatClient, RemoteAgent, RemoteCritic, ScriptedCritic, ScriptedPolicy
from .agents.prompts import prompt_hash, render_critic_prompt, render_generator_prompt
from .config import ConfigError, RunConfig, load_config, parse_config
from .core import RewardBins, derive_seed
from .environment import (
    BaselineError,
    InfrastructureError,
    Landscape,
    SimulatedExecutor,
    SubprocessExecutor,
    load_problem_set,
)
from .logio import (
    LOG_NAME,
    MANIFEST_NAME,
    LogWriter,
    build_trees,
    now_stamp,
    read_log,
    read_manifest,
    write_manifest,
)
from .metrics import write_report
from .search import MethodSpec, SearchSettings, generation_context, run_method
from .valuedata import OraclePredictor, RemotePredictor, export_training_set, extract_examples

log = logging.getLogger("maxcode")

CORRUPT_LIMIT = 0.01


def simulated_landscapes(cfg: RunConfig) -> dict[str, Landscape]:
    sim = cfg.simulation
    out = {}
    for i in range(sim.problems):
        seed = derive_seed(cfg.seed, "landscape", i) & 0x7FFFFFFF
        out[f"sim-{i:03d}"] = Landscape(
            seed=seed, dim=sim.dim, extent=sim.extent, optimum_speedup=sim.optimum, correctness_threshold=sim.threshold
        )
    return out


def build_problems(cfg: RunConfig, limit: int | None = None):
    """Problems of a run plus the landscapes behind them (simulate mode only)."""
    if cfg.mode == "simulate":
        landscapes = simulated_landscapes(cfg)
        problems = [ls.problem(pid, cfg.bins) for pid, ls in landscapes.items()]
    else:
        landscapes = None
        problems = load_problem_set(cfg.problems_dir, cfg.bins, cfg.timeout_ms)
    if limit is not None:
        problems = problems[:limit]
        if landscapes is not None:
            landscapes = {p.id: landscapes[p.id] for p in problems}
    return problems, landscapes


def build_agents(cfg: RunConfig, landscapes):
    a = cfg.agent
    clients = []
    if a.kind == "scripted":
        agent = ScriptedPolicy(landscapes, a.follow_hint)
        critic = ScriptedCritic(landscapes, a.critic_accuracy)
    else:
        def client(model):
            c = ChatClient(model, a.api_base, max_retries=a.max_retries, max_in_flight=a.max_in_flight)
            clients.append(c)
            return c

        agent = RemoteAgent(client(a.model), whole_fallback=a.whole_completion_fallback)
        critic = RemoteCritic(client(a.critic_model or a.model))
    predictor = None
    if cfg.predictor == "oracle":
        predictor = OraclePredictor(landscapes, cfg.bins)
    elif cfg.predictor == "remote":
        predictor = RemotePredictor(ChatClient(a.value_model or a.model, a.api_base, max_retries=a.max_retries))
        clients.append(predictor.client)
    return agent, critic, predictor, clients


def settings_for(cfg: RunConfig) -> SearchSettings:
    return SearchSettings(
        seed=cfg.seed,
        temperature=cfg.agent.temperature,
        critic_temperature=cfg.agent.critic_temperature,
        max_tokens=cfg.agent.max_tokens,
        workers=cfg.workers,
        template_dir=cfg.template_dir,
    )


def config_from_manifest(manifest: dict) -> RunConfig:
    return parse_config(manifest["config"], base_dir=Path(manifest["config_dir"]))


def _load_manifest_near(log_path: Path, required: bool = False) -> dict | None:
    path = log_path.parent / MANIFEST_NAME
    if path.exists():
        return read_manifest(path)
    if required:
        raise FileNotFoundError(f"no {MANIFEST_NAME} next to {log_path}")
    return None


def cmd_run(args) -> int:
    overrides = {"seed": args.seed} if args.seed is not None else {}
    if args.out:
        overrides["output_dir"] = str(Path(args.out).resolve())
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    out = cfg.output_dir
    log_path = out / LOG_NAME
    if log_path.exists() and log_path.stat().st_size > 0:
        print(f"{log_path} already exists; pick a fresh output_dir", file=sys.stderr)
        return 2
    try:
        problems, landscapes = build_problems(cfg, args.limit_problems)
    except (OSError, ValueError) as exc:
        print(f"cannot load problems: {exc}", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    agent, critic, predictor, clients = build_agents(cfg, landscapes)
    executor = SimulatedExecutor(landscapes) if cfg.mode == "simulate" else SubprocessExecutor(cfg.execution)
    manifest = {
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "config": cfg.raw,
        "config_dir": str(Path(args.config).resolve().parent),
        "log": LOG_NAME,
        "problems": [p.id for p in problems],
        "methods": [m.name for m in cfg.methods],
        "cells": [],
        "totals": {},
        "complete": False,
        "started": now_stamp(),
    }
    manifest_path = out / MANIFEST_NAME
    write_manifest(manifest_path, manifest)
    settings = settings_for(cfg)
    totals = {"cells": 0, "nodes": 0, "evaluations": 0, "predictions": 0, "truncated": 0, "degraded": 0, "failed": 0}
    status = 0
    t0 = time.monotonic()
    try:
        with LogWriter(log_path) as writer:
            for problem in problems:
                if cfg.mode == "subprocess":
                    try:
                        problem = executor.with_baseline(problem)
                    except (BaselineError, InfrastructureError) as exc:
                        log.error("%s: baseline failed: %s", problem.id, exc)
                        for m in cfg.methods:
                            manifest["cells"].append({"problem_id": problem.id, "method": m.name, "error": str(exc)})
                        totals["failed"] += len(cfg.methods)
                        status = 1
                        continue
                for method in cfg.methods:
                    tree = run_method(
                        problem, method, agent, executor, cfg.budget, critic, predictor, settings, cfg.flat_n
                    )
                    writer.write_tree(tree)
                    evals = len(tree.nodes) - 1
                    manifest["cells"].append({
                        "problem_id": problem.id,
                        "method": method.name,
                        "run_id": tree.run_id,
                        "evaluations": evals,
                        "predictions": tree.predictions,
                        "truncated": tree.truncated,
                        "degraded": len(tree.degraded),
                    })
                    totals["cells"] += 1
                    totals["nodes"] += len(tree.nodes)
                    totals["evaluations"] += evals
                    totals["predictions"] += tree.predictions
                    totals["truncated"] += int(tree.truncated)
                    totals["degraded"] += len(tree.degraded)
                    log.info("%s: %d evaluations%s", tree.run_id, evals, " (truncated)" if tree.truncated else "")
                    manifest["totals"] = totals
                    write_manifest(manifest_path, manifest)
        manifest["complete"] = status == 0
    except (InfrastructureError, KeyboardInterrupt) as exc:
        log.error("run aborted: %s", exc)
        manifest["error"] = str(exc) or type(exc).__name__
        status = 1
    finally:
        for c in clients:
            c.close()
        if isinstance(predictor, RemotePredictor):
            totals["predictor_parse_failures"] = predictor.parse_failures
        manifest["totals"] = totals
        manifest["finished"] = now_stamp()
        manifest["elapsed_s"] = round(time.monotonic() - t0, 3)
        write_manifest(manifest_path, manifest)
    print(f"{totals['cells']} cells, {totals['evaluations']} evaluations -> {log_path}")
    return status


def _read_trees(log_path: Path):
    result = read_log(log_path)
    if result.total == 0:
        raise ValueError(f"{log_path} holds no records")
    if result.corrupt:
        log.warning("%d of %d records corrupt", result.corrupt, result.total)
    if result.corrupt_fraction > CORRUPT_LIMIT:
        raise ValueError(f"{result.corrupt} of {result.total} records corrupt (limit {CORRUPT_LIMIT:.0%})")
    return build_trees(result.records)


def cmd_report(args) -> int:
    log_path = Path(args.log)
    try:
        trees = _read_trees(log_path)
    except (OSError, ValueError) as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return 1
    manifest = _load_manifest_near(log_path)
    max_depth = None
    if manifest is not None:
        max_depth = int(manifest["config"].get("max_depth", 0)) or None
    paths = write_report(trees, args.out, max_depth)
    sys.stdout.write(paths["summary_txt"].read_text(encoding="utf-8"))
    return 0


def cmd_extract_values(args) -> int:
    log_path = Path(args.log)
    try:
        trees = _read_trees(log_path)
    except (OSError, ValueError) as exc:
        print(f"extraction failed: {exc}", file=sys.stderr)
        return 1
    manifest = _load_manifest_near(log_path)
    problems = {}
    horizon = args.horizon
    bins = RewardBins.parse(args.bins) if args.bins else None
    if manifest is not None:
        cfg = config_from_manifest(manifest)
        problems = {p.id: p for p in build_problems(cfg)[0]}
        horizon = horizon or cfg.budget.max_depth
        bins = bins or cfg.bins
    if bins is None or horizon is None:
        print("--bins and --horizon are required without a manifest", file=sys.stderr)
        return 2
    examples, stats = [], {}
    for tree in trees:
        problem = problems.get(tree.problem_id)
        if problem is not None and problem.bins != bins:
            problem = type(problem)(**{**problem.__dict__, "bins": bins})
        examples.extend(extract_examples(tree, bins, tree.gamma, horizon, args.max_prefix, problem, stats))
    out = Path(args.out) if args.out else log_path.parent / "values"
    try:
        train, val = export_training_set(examples, args.split, args.seed, out)
    except ValueError as exc:
        print(f"extraction failed: {exc}", file=sys.stderr)
        return 1
    print(f"{len(examples)} examples ({stats.get('skipped', 0)} skipped) -> {train}, {val}")
    return 0


def replay_node(log_path: Path, node_id: str, critic: bool = False) -> tuple[str, str | None, dict]:
    """Re-render the prompt that produced ``node_id`` (or its critique).

    Returns (prompt, logged hash, record dump).
    """
    manifest = _load_manifest_near(log_path, required=True)
    cfg = config_from_manifest(manifest)
    result = read_log(log_path)
    rec = next((r for r in result.records if r.node_id == node_id), None)
    if rec is None:
        raise KeyError(f"node {node_id} not in {log_path}")
    tree = next(t for t in build_trees(r for r in result.records if r.run_id == rec.run_id))
    problems, _ = build_problems(cfg)
    problem = next((p for p in problems if p.id == rec.problem_id), None)
    if problem is None:
        raise KeyError(f"problem {rec.problem_id} not in the run's problem set")
    variant = MethodSpec.parse(rec.method.replace("-", ":", 1)).variant
    node = tree.nodes[node_id]
    dump = {k: v for k, v in asdict(rec).items() if k != "wall_time"}
    if critic:
        if node.critique is None:
            raise KeyError(f"node {node_id} carries no critique")
        level = tree.critic_levels.get(node_id, node.level + 1)
        bare = type(node)(**{**node.__dict__, "critique": None})
        ctx = generation_context(tree, problem, bare, level, variant.uses_best_perf)
        prompt = render_critic_prompt(variant.critic_variant, ctx, cfg.template_dir)
        return prompt, rec.critic_prompt_hash, dump
    if node.is_root:
        raise KeyError(f"{node_id} is the root; no prompt produced it")
    parent = tree.nodes[node.parent_id]
    ctx = generation_context(tree, problem, parent, node.level, variant.uses_best_perf)
    prompt = render_generator_prompt(variant, ctx, cfg.template_dir)
    return prompt, rec.prompt_hash, dump


def cmd_replay(args) -> int:
    try:
        prompt, logged, dump = replay_node(Path(args.log), args.node, args.critic)
    except (OSError, KeyError, ValueError) as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 1
    actual = prompt_hash(prompt)
    print(prompt)
    print("----- STATE -----")
    print(json.dumps(dump, indent=2, ensure_ascii=False))
    ok = logged == actual
    print(f"prompt hash {actual} {'matches' if ok else 'DIFFERS from'} logged {logged}")
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxcode", description="Max-reward search over program candidates.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every problem x method cell of a config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--limit-problems", type=int)
    r.add_argument("--out", help="override output_dir")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="metrics tables from a trajectory log")
    rep.add_argument("--log", required=True)
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)

    ev = sub.add_parser("extract-values", help="value-model training files from a trajectory log")
    ev.add_argument("--log", required=True)
    ev.add_argument("--bins", help="s1,s2,s3 percent thresholds (default: the run's bins)")
    ev.add_argument("--horizon", type=int, help="default: the run's max_depth")
    ev.add_argument("--max-prefix", type=int, default=2)
    ev.add_argument("--split", type=float, default=0.8)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", help="output directory (default: <log dir>/values)")
    ev.set_defaults(func=cmd_extract_values)

    rp = sub.add_parser("replay", help="re-render the prompt behind a logged node")
    rp.add_argument("--log", required=True)
    rp.add_argument("--node", required=True)
    rp.add_argument("--critic", action="store_true", help="replay the critic prompt of the node instead")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command == "run" and args.limit_problems is not None and args.limit_problems < 1:
        print("--limit-problems must be positive", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
