"""Run configuration: a flat ``key = value`` file.

Blank lines and lines starting with ``#`` or ``;`` are ignored. Keys are
listed in ``KEYS`` with their defaults; anything else is rejected.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .agents.prompts import BUILTIN_TEMPLATE_SETS
from .core import PIE_BINS, RewardBins
from .environment.executor import ExecConfig
from .search import MethodSpec, SearchBudget, SearchConfigError


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


SIMULATE_KEYS = ("sim_problems", "sim_dim", "sim_extent", "sim_optimum", "sim_threshold")
SUBPROCESS_KEYS = ("compile_command", "run_command", "source_name", "warmup_runs", "timed_runs")

KEYS = {
    "mode": "simulate",
    "problems_dir": None,
    "methods": "beam:Base",
    "max_evaluations": "256",
    "max_depth": "8",
    "beam_width_k": "8",
    "repair_cap": "4",
    "oversample_m": None,
    "flat_n": None,
    "gamma": "1.0",
    "bins": "125,180,260",
    "seed": None,
    "output_dir": "runs",
    "agent": "scripted",
    "model": "gpt-4o-mini",
    "critic_model": None,
    "value_model": None,
    "predictor": None,
    "api_base": None,
    "temperature": "0.6",
    "critic_temperature": None,
    "max_tokens": "4096",
    "max_in_flight": "8",
    "max_retries": "3",
    "whole_completion_fallback": "false",
    "template_dir": None,
    "workers": "1",
    "timeout_ms": "10000",
    "scripted_follow_hint": "0.7",
    "scripted_critic_accuracy": "0.7",
    "sim_problems": "8",
    "sim_dim": "3",
    "sim_extent": "12",
    "sim_optimum": "4.0",
    "sim_threshold": "0.2",
    "compile_command": "g++ -O2 -o {bin} {src}",
    "run_command": "{bin}",
    "source_name": "main.cpp",
    "warmup_runs": "1",
    "timed_runs": "5",
}


@dataclass
class AgentSettings:
    kind: str = "scripted"
    model: str = "gpt-4o-mini"
    critic_model: str | None = None
    value_model: str | None = None
    api_base: str | None = None
    temperature: float = 0.6
    critic_temperature: float | None = None
    max_tokens: int = 4096
    max_in_flight: int = 8
    max_retries: int = 3
    whole_completion_fallback: bool = False
    follow_hint: float = 0.7
    critic_accuracy: float = 0.7


@dataclass
class SimulationSettings:
    problems: int = 8
    dim: int = 3
    extent: int = 12
    optimum: float = 4.0
    threshold: float = 0.2


@dataclass
class RunConfig:
    mode: str
    methods: list[MethodSpec]
    budget: SearchBudget
    bins: RewardBins = PIE_BINS
    seed: int | None = None
    output_dir: Path = Path("runs")
    problems_dir: Path | None = None
    agent: AgentSettings = field(default_factory=AgentSettings)
    predictor: str | None = None
    flat_n: int | None = None
    gamma: float = 1.0
    template_dir: str | None = None
    workers: int = 1
    timeout_ms: int = 10_000
    simulation: SimulationSettings | None = None
    execution: ExecConfig | None = None
    raw: dict[str, str] = field(default_factory=dict)

    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict[str, str]) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def read_config_text(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=None)
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    return {k.strip().lower(): v.strip() for k, v in parser["run"].items()}


def _as(raw: dict, key: str, kind, check=None, what: str = ""):
    value = raw.get(key)
    if value is None:
        return None
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None
    if check is not None and not check(out):
        raise ConfigError(f"{key}: {value!r} {what}")
    return out


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


_bool.__name__ = "boolean"


def parse_config(raw_in: dict[str, str], base_dir: Path | None = None, overrides: dict | None = None) -> RunConfig:
    unknown = sorted(set(raw_in) - set(KEYS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    given = dict(raw_in)
    for k, v in (overrides or {}).items():
        if v is not None:
            given[k] = str(v)
    mode = given.get("mode", KEYS["mode"])
    if mode not in ("simulate", "subprocess"):
        raise ConfigError(f"mode: expected simulate or subprocess, got {mode!r}")
    foreign = SUBPROCESS_KEYS if mode == "simulate" else SIMULATE_KEYS
    for k in foreign:
        if k in given:
            raise ConfigError(f"{k}: not allowed in {mode} mode")
    raw = {k: v for k, v in KEYS.items() if v is not None and k not in foreign}
    raw.update(given)

    positive = lambda v: v > 0  # noqa: E731
    seed = _as(raw, "seed", int)
    if mode == "simulate" and seed is None:
        raise ConfigError("seed: required in simulate mode")
    if seed is None:
        seed = 0

    gamma = _as(raw, "gamma", float, lambda g: 0 < g <= 1, "must lie in (0, 1]")
    try:
        methods = [MethodSpec.parse(m, gamma) for m in raw["methods"].split(",") if m.strip()]
    except (SearchConfigError, ValueError) as exc:
        raise ConfigError(f"methods: {exc}") from None
    if not methods:
        raise ConfigError("methods: at least one method is required")
    if len({m.name for m in methods}) != len(methods):
        raise ConfigError("methods: duplicate method")
    try:
        budget = SearchBudget(
            max_evaluations=_as(raw, "max_evaluations", int),
            max_depth=_as(raw, "max_depth", int),
            beam_width_k=_as(raw, "beam_width_k", int),
            repair_cap=_as(raw, "repair_cap", int),
            oversample_m=_as(raw, "oversample_m", int),
        )
    except SearchConfigError as exc:
        raise ConfigError(f"budget: {exc}") from None
    try:
        bins = RewardBins.parse(raw["bins"])
    except ValueError as exc:
        raise ConfigError(f"bins: {exc}") from None
    flat_n = _as(raw, "flat_n", int, positive, "must be positive")
    if flat_n is not None and flat_n > budget.max_evaluations:
        raise ConfigError("flat_n: exceeds max_evaluations")

    agent_kind = raw["agent"]
    if agent_kind not in ("scripted", "remote"):
        raise ConfigError(f"agent: expected scripted or remote, got {agent_kind!r}")
    if agent_kind == "scripted" and mode != "simulate":
        raise ConfigError("agent: scripted agents only run in simulate mode")
    agent = AgentSettings(
        kind=agent_kind,
        model=raw["model"],
        critic_model=raw.get("critic_model"),
        value_model=raw.get("value_model"),
        api_base=raw.get("api_base"),
        temperature=_as(raw, "temperature", float, lambda t: t >= 0, "must be nonnegative"),
        critic_temperature=_as(raw, "critic_temperature", float, lambda t: t >= 0, "must be nonnegative"),
        max_tokens=_as(raw, "max_tokens", int, positive, "must be positive"),
        max_in_flight=_as(raw, "max_in_flight", int, positive, "must be positive"),
        max_retries=_as(raw, "max_retries", int, lambda v: v >= 0, "must be nonnegative"),
        whole_completion_fallback=_as(raw, "whole_completion_fallback", _bool),
        follow_hint=_as(raw, "scripted_follow_hint", float, lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
        critic_accuracy=_as(raw, "scripted_critic_accuracy", float, lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
    )

    predictor = raw.get("predictor")
    if any(m.algorithm == "value_guided" for m in methods):
        predictor = predictor or ("oracle" if mode == "simulate" else "remote")
    if predictor is not None:
        if predictor not in ("oracle", "remote"):
            raise ConfigError(f"predictor: expected oracle or remote, got {predictor!r}")
        if predictor == "oracle" and mode != "simulate":
            raise ConfigError("predictor: the oracle predictor needs simulate mode")
        if predictor == "remote" and agent_kind != "remote" and not raw.get("value_model"):
            raise ConfigError("value_model: required for a remote predictor without a remote agent")

    def _resolve(p: str) -> Path:
        path = Path(p).expanduser()
        return path if path.is_absolute() or base_dir is None else base_dir / path

    problems_dir = _resolve(raw["problems_dir"]) if raw.get("problems_dir") else None
    simulation = execution = None
    timeout_ms = _as(raw, "timeout_ms", int, positive, "must be positive")
    if mode == "subprocess":
        if problems_dir is None:
            raise ConfigError("problems_dir: required in subprocess mode")
        if not problems_dir.is_dir():
            raise ConfigError(f"problems_dir: {problems_dir} is not a directory")
        try:
            execution = ExecConfig(
                compile_command_template=raw["compile_command"],
                run_command_template=raw["run_command"],
                source_name=raw["source_name"],
                warmup_runs=_as(raw, "warmup_runs", int),
                timed_runs=_as(raw, "timed_runs", int),
                timeout_ms=timeout_ms,
            )
        except ValueError as exc:
            raise ConfigError(f"execution: {exc}") from None
    else:
        if problems_dir is not None:
            raise ConfigError("problems_dir: not used in simulate mode (landscapes come from the seed)")
        simulation = SimulationSettings(
            problems=_as(raw, "sim_problems", int, positive, "must be positive"),
            dim=_as(raw, "sim_dim", int, positive, "must be positive"),
            extent=_as(raw, "sim_extent", int, lambda v: v >= 2, "must be at least 2"),
            optimum=_as(raw, "sim_optimum", float, lambda v: v > 1, "must exceed 1"),
            threshold=_as(raw, "sim_threshold", float, lambda v: 0 <= v < 1, "must lie in [0, 1)"),
        )
        points = simulation.extent**simulation.dim
        if points > 10**6:
            raise ConfigError(f"sim_extent: grid of {points} points exceeds the 10^6 enumeration limit")

    template_dir = raw.get("template_dir")
    if template_dir and template_dir not in BUILTIN_TEMPLATE_SETS:
        template_dir = str(_resolve(template_dir))
    return RunConfig(
        mode=mode,
        methods=methods,
        budget=budget,
        bins=bins,
        seed=seed,
        output_dir=_resolve(raw["output_dir"]),
        problems_dir=problems_dir,
        agent=agent,
        predictor=predictor,
        flat_n=flat_n,
        gamma=gamma,
        template_dir=template_dir,
        workers=_as(raw, "workers", int, positive, "must be positive"),
        timeout_ms=timeout_ms,
        simulation=simulation,
        execution=execution,
        raw=raw,
    )


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    return parse_config(read_config_text(text), base_dir=path.parent, overrides=overrides)
