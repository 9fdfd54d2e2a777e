"""Per-problem and cross-method evaluation metrics plus report writers."""
from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import SearchTree


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemMetrics:
    correct_rate: float
    fast1_rate: float
    max_speedup: float
    selected_correct_rate: float | None = None

    def __iter__(self):
        # unpacks as the (correct, fast1, max) triple
        return iter((self.correct_rate, self.fast1_rate, self.max_speedup))


@dataclass
class MethodResults:
    method: str
    per_problem_max_speedup: dict[str, float] = field(default_factory=dict)
    per_problem_correct_rate: dict[str, float] = field(default_factory=dict)
    per_problem_fast1: dict[str, float] = field(default_factory=dict)
    per_problem_selected_correct: dict[str, float | None] = field(default_factory=dict)

    def __post_init__(self):
        keys = set(self.per_problem_max_speedup)
        if keys != set(self.per_problem_correct_rate) or keys != set(self.per_problem_fast1):
            raise MetricsError(f"{self.method}: metric maps cover different problems")

    def add(self, problem_id: str, m: ProblemMetrics) -> None:
        self.per_problem_max_speedup[problem_id] = m.max_speedup
        self.per_problem_correct_rate[problem_id] = m.correct_rate
        self.per_problem_fast1[problem_id] = m.fast1_rate
        self.per_problem_selected_correct[problem_id] = m.selected_correct_rate

    @property
    def problems(self) -> list[str]:
        return sorted(self.per_problem_max_speedup)


def compute_problem_metrics(tree: SearchTree) -> ProblemMetrics:
    """Rates over every evaluated node (repairs included); max floored at the original program."""
    nodes = tree.evaluated()
    if not nodes:
        raise MetricsError(f"tree {tree.run_id} has no evaluated nodes")
    correct = [n for n in nodes if n.correct]
    fast = [n for n in correct if n.speedup > 1.0]
    best = max((n.speedup for n in correct), default=1.0)
    selected = [tree.nodes[i] for i in tree.selected if i in tree.nodes]
    sel_rate = sum(n.correct for n in selected) / len(selected) if selected else None
    return ProblemMetrics(len(correct) / len(nodes), len(fast) / len(nodes), max(best, 1.0), sel_rate)


def collect_results(trees: Iterable[SearchTree]) -> dict[str, MethodResults]:
    out: dict[str, MethodResults] = {}
    for tree in trees:
        res = out.setdefault(tree.method, MethodResults(tree.method))
        if tree.problem_id in res.per_problem_max_speedup:
            raise MetricsError(f"duplicate tree for {tree.method} / {tree.problem_id}")
        res.add(tree.problem_id, compute_problem_metrics(tree))
    return out


def median_of_max(results: MethodResults | Mapping[str, float] | Sequence[float]) -> float:
    if isinstance(results, MethodResults):
        values = list(results.per_problem_max_speedup.values())
    elif isinstance(results, Mapping):
        values = list(results.values())
    else:
        values = list(results)
    if not values:
        raise MetricsError("median of an empty set")
    return float(statistics.median(values))


def _fractional_ranks(values: Mapping[str, float]) -> dict[str, float]:
    ordered = sorted(values, key=lambda k: -values[k])
    ranks: dict[str, float] = {}
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and values[ordered[j + 1]] == values[ordered[i]]:
            j += 1
        shared = (i + 1 + j + 1) / 2
        for k in ordered[i : j + 1]:
            ranks[k] = shared
        i = j + 1
    return ranks


def average_rank(table: Mapping[str, Mapping[str, float]]) -> dict[str, float]:
    """Mean per-problem rank of each method; rank 1 is the fastest, ties share."""
    if not table:
        return {}
    methods = sorted(table)
    problems = set(table[methods[0]])
    for m in methods[1:]:
        other = set(table[m])
        if other != problems:
            diff = sorted(problems ^ other)
            raise MetricsError(f"methods {methods[0]} and {m} cover different problems: {diff}")
    if not problems:
        raise MetricsError("no problems to rank")
    totals = dict.fromkeys(methods, 0.0)
    for p in problems:
        for m, r in _fractional_ranks({m: table[m][p] for m in methods}).items():
            totals[m] += r
    return {m: totals[m] / len(problems) for m in methods}


def _prefix_max(tree: SearchTree, max_depth: int) -> list[float]:
    best_at = [1.0] * (max_depth + 1)
    for n in tree.evaluated():
        if n.correct and n.depth <= max_depth:
            best_at[n.depth] = max(best_at[n.depth], n.speedup)
    out, running = [], 1.0
    for d in range(1, max_depth + 1):
        running = max(running, best_at[d])
        out.append(running)
    return out


def scaling_curve(trees: Sequence[SearchTree], method: str | None = None, max_depth: int | None = None) -> list[tuple[int, float]]:
    """Median over problems of the best correct speedup found at depth <= d."""
    chosen = [t for t in trees if method is None or t.method == method]
    if not chosen:
        return []
    depth = max_depth if max_depth is not None else max(t.max_depth() for t in chosen)
    if depth < 1:
        return []
    per_problem = [_prefix_max(t, depth) for t in chosen]
    return [(d + 1, float(statistics.median(col[d] for col in per_problem))) for d in range(depth)]


def write_report(trees: Sequence[SearchTree], out_dir: str | Path, max_depth: int | None = None) -> dict[str, Path]:
    """Write the rank/median table, per-problem metrics, scaling curves and a text summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = collect_results(trees)
    table = {m: r.per_problem_max_speedup for m, r in results.items()}
    ranks = average_rank(table)
    paths: dict[str, Path] = {}

    paths["summary_csv"] = out / "summary.csv"
    with open(paths["summary_csv"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "avg_rank", "median_max_speedup", "mean_correct", "mean_fast1", "mean_selected_correct", "problems"])
        for m in sorted(results):
            r = results[m]
            sel = [v for v in r.per_problem_selected_correct.values() if v is not None]
            w.writerow([
                m,
                f"{ranks[m]:.4f}",
                f"{median_of_max(r):.4f}",
                f"{statistics.fmean(r.per_problem_correct_rate.values()):.4f}",
                f"{statistics.fmean(r.per_problem_fast1.values()):.4f}",
                f"{statistics.fmean(sel):.4f}" if sel else "",
                len(r.problems),
            ])

    paths["problems_csv"] = out / "per_problem.csv"
    with open(paths["problems_csv"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "problem_id", "max_speedup", "correct_rate", "fast1_rate", "selected_correct_rate"])
        for m in sorted(results):
            r = results[m]
            for p in r.problems:
                sel = r.per_problem_selected_correct.get(p)
                w.writerow([
                    m,
                    p,
                    f"{r.per_problem_max_speedup[p]:.6f}",
                    f"{r.per_problem_correct_rate[p]:.6f}",
                    f"{r.per_problem_fast1[p]:.6f}",
                    "" if sel is None else f"{sel:.6f}",
                ])

    curves = {}
    for m in sorted(results):
        curve = scaling_curve(trees, m, max_depth)
        curves[m] = curve
        safe = m.replace("/", "_").replace(":", "_")
        path = out / f"scaling_{safe}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["depth", "median_max_speedup"])
            for d, v in curve:
                w.writerow([d, f"{v:.6f}"])
        paths[f"scaling:{m}"] = path

    paths["summary_txt"] = out / "summary.txt"
    paths["summary_txt"].write_text(format_summary(results, ranks), encoding="utf-8")
    return paths


def format_summary(results: Mapping[str, MethodResults], ranks: Mapping[str, float]) -> str:
    width = max([len("Method")] + [len(m) for m in results])
    lines = [f"{'Method':<{width}}  {'Avg rank':>8}  {'Median max':>10}  {'Correct':>7}  {'Fast1':>6}"]
    lines.append("-" * len(lines[0]))
    for m in sorted(results, key=lambda k: (ranks[k], k)):
        r = results[m]
        lines.append(
            f"{m:<{width}}  {ranks[m]:>8.2f}  {median_of_max(r):>9.2f}x  "
            f"{statistics.fmean(r.per_problem_correct_rate.values()):>7.1%}  "
            f"{statistics.fmean(r.per_problem_fast1.values()):>6.1%}"
        )
    n = len(next(iter(results.values())).problems) if results else 0
    lines.append(f"({n} problems)")
    return "\n".join(lines) + "\n"
