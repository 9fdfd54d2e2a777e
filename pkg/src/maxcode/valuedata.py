"""Categorical value targets from search trees, and value-predictor contracts."""
from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .agents.prompts import render_reward_prompt
from .agents.remote import ChatClient
from .core import (
    MAX_CATEGORY,
    NUM_CATEGORIES,
    IOPair,
    ProblemSpec,
    RewardBins,
    SearchState,
    SearchTree,
    best_category_so_far,
    bin_speedup,
    compute_value_target,
    to_category,
)
from .environment.simulator import GrammarError, Landscape, parse_params, reachable_best

log = logging.getLogger(__name__)

_DIGIT = re.compile(r"^\s*\**\s*([0-4])\s*\**\s*\.?\s*$")


@dataclass(frozen=True)
class ValueExample:
    problem_id: str
    prefix_render: str
    u_cat: int
    remaining_rounds: int
    label: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


@dataclass(frozen=True)
class CategoricalValue:
    probabilities: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(x) for x in self.probabilities)
        object.__setattr__(self, "probabilities", p)
        if len(p) != NUM_CATEGORIES or any(x < 0 for x in p) or abs(sum(p) - 1.0) > 1e-9:
            raise ValueError(f"not a normalized {NUM_CATEGORIES}-way distribution: {p}")

    @classmethod
    def one_hot(cls, category: int) -> "CategoricalValue":
        return cls(tuple(1.0 if i == category else 0.0 for i in range(NUM_CATEGORIES)))

    @classmethod
    def uniform(cls) -> "CategoricalValue":
        return cls((1.0 / NUM_CATEGORIES,) * NUM_CATEGORIES)


def expected_category(v: CategoricalValue) -> float:
    return sum(i * p for i, p in enumerate(v.probabilities))


def ranking_key(v: CategoricalValue, order: int) -> tuple[float, float, int]:
    """Sort key, best first: expectation, then class-4 mass, then creation order."""
    return (-expected_category(v), -v.probabilities[MAX_CATEGORY], order)


class Predictor(Protocol):
    name: str

    def predict(
        self, render: str, u_cat: int, remaining_rounds: int, *, problem_id: str = "", code: str = ""
    ) -> CategoricalValue: ...


def predict_value(
    predictor: Predictor, render: str, u_cat: int, remaining_rounds: int, *, problem_id: str = "", code: str = ""
) -> CategoricalValue:
    if not render.strip():
        raise ValueError("empty render")
    return predictor.predict(render, u_cat, remaining_rounds, problem_id=problem_id, code=code)


def parse_category_reply(reply: str) -> int | None:
    m = _DIGIT.match(reply)
    return int(m.group(1)) if m else None


class RemotePredictor:
    """Reads a single digit 0-4 from a chat model as a one-hot distribution."""

    def __init__(self, client: ChatClient, temperature: float = 0.7, max_tokens: int = 8):
        self.client = client
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.parse_failures = 0
        self.calls = 0
        self.name = f"remote:{client.model}"

    def predict(self, render, u_cat, remaining_rounds, *, problem_id="", code=""):
        self.calls += 1
        reply = self.client.complete(render, self.temperature, 1, self.max_tokens)[0]
        cat = parse_category_reply(reply)
        if cat is None:
            self.parse_failures += 1
            log.warning("unparseable value reply %r", reply[:80])
            return CategoricalValue.uniform()
        return CategoricalValue.one_hot(cat)


class OraclePredictor:
    """One-hot at the best category reachable from the candidate on its landscape.

    Reachable means within ``remaining_rounds`` single-unit parameter edits,
    the candidate itself included; the label never falls below ``u_cat``.
    """

    def __init__(self, landscapes: dict[str, Landscape], bins: dict[str, RewardBins] | RewardBins):
        self.landscapes = landscapes
        self.bins = bins
        self.calls = 0
        self.name = "oracle"

    def label(self, problem_id: str, code: str, u_cat: int, remaining_rounds: int) -> int:
        landscape = self.landscapes[problem_id]
        bins = self.bins[problem_id] if isinstance(self.bins, dict) else self.bins
        try:
            params = parse_params(code, landscape.dim)
        except GrammarError:
            return u_cat
        best = reachable_best(landscape, params, max(0, remaining_rounds))
        cat = bin_speedup(best, True, bins) if best >= 0 else 0
        return max(u_cat, cat)

    def predict(self, render, u_cat, remaining_rounds, *, problem_id="", code=""):
        self.calls += 1
        return CategoricalValue.one_hot(self.label(problem_id, code, u_cat, remaining_rounds))


def _placeholder_problem(tree: SearchTree, bins: RewardBins) -> ProblemSpec:
    return ProblemSpec(
        id=tree.problem_id,
        description=f"Problem {tree.problem_id}",
        baseline_code=tree.root.code,
        test_cases=(IOPair("", ""),),
        bins=bins,
    )


def _leaf_paths(tree: SearchTree) -> list[list[SearchState]]:
    has_child = {n.parent_id for n in tree.nodes.values() if n.parent_id is not None}
    leaves = [n for n in sorted(tree.nodes.values(), key=lambda s: s.order) if n.node_id not in has_child]
    return [tree.path(leaf.node_id) for leaf in leaves if not leaf.is_root]


def extract_examples(
    tree: SearchTree,
    bins: RewardBins,
    gamma: float = 1.0,
    horizon: int = 8,
    max_prefix_len: int = 2,
    problem: ProblemSpec | None = None,
    stats: dict | None = None,
) -> list[ValueExample]:
    """One example per prefix node of length <= ``max_prefix_len``.

    The label of a prefix is the value target over the realized future of a
    root-to-leaf path through it; when several paths share the prefix the
    largest label is kept.
    """
    if horizon < 1 or max_prefix_len < 1:
        raise ValueError("horizon and max_prefix_len must be positive")
    problem = problem or _placeholder_problem(tree, bins)
    labels: dict[str, tuple[SearchState, list[SearchState], float, int]] = {}
    skipped = 0
    for path in _leaf_paths(tree):
        states = path[1:]
        if any(s.feedback is None for s in states):
            skipped += 1
            continue
        cats = [bin_speedup(s.speedup, s.correct, bins) for s in states]
        for t in range(min(max_prefix_len, len(states))):
            node = states[t]
            u_t = best_category_so_far(cats[: t + 1], gamma)
            label = compute_value_target(u_t, cats[t:], gamma)
            prev = labels.get(node.node_id)
            if prev is None or label > prev[3]:
                labels[node.node_id] = (node, states[:t], u_t, label)
    examples = []
    for node, history, u_t, label in sorted(labels.values(), key=lambda item: item[0].order):
        prefix_len = len(history) + 1
        remaining = max(0, horizon - prefix_len)
        render = render_reward_prompt(problem, history, node.code, remaining, bins)
        examples.append(ValueExample(tree.problem_id, render, to_category(u_t), remaining, label))
    if stats is not None:
        stats["skipped"] = stats.get("skipped", 0) + skipped
    if skipped:
        log.warning("skipped %d prefixes with missing feedback in %s", skipped, tree.run_id)
    return examples


def split_problems(problem_ids: Sequence[str], split_fraction: float, seed: int) -> tuple[list[str], list[str]]:
    ids = sorted(set(problem_ids))
    if len(ids) < 2:
        raise ValueError("a train/validation split needs at least two distinct problems")
    if not 0 < split_fraction < 1:
        raise ValueError("split_fraction must lie in (0, 1)")
    random.Random(seed).shuffle(ids)
    n_train = min(len(ids) - 1, max(1, math.floor(split_fraction * len(ids))))
    return sorted(ids[:n_train]), sorted(ids[n_train:])


def export_training_set(
    examples: Sequence[ValueExample], split_fraction: float, seed: int, out_dir: str | Path
) -> tuple[Path, Path]:
    train_ids, _ = split_problems([e.problem_id for e in examples], split_fraction, seed)
    train_set = set(train_ids)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_path, val_path = out / "values_train.jsonl", out / "values_val.jsonl"
    with open(train_path, "w", encoding="utf-8") as ft, open(val_path, "w", encoding="utf-8") as fv:
        for ex in examples:
            (ft if ex.problem_id in train_set else fv).write(ex.to_json() + "\n")
    return train_path, val_path


def load_examples(path: str | Path) -> list[ValueExample]:
    with open(path, encoding="utf-8") as fh:
        return [ValueExample(**json.loads(line)) for line in fh if line.strip()]
