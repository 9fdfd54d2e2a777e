"""Trajectory log (one JSON object per line) and run manifest."""
from __future__ import annotations

import json
import logging
import threading
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .core import Critique, ExecFeedback, SearchState, SearchTree
from .search import MethodSpec

log = logging.getLogger(__name__)

LOG_NAME = "trajectories.jsonl"
MANIFEST_NAME = "manifest.json"
VOLATILE_FIELDS = ("wall_time",)


class LogError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryRecord:
    run_id: str
    problem_id: str
    node_id: str
    parent_id: str | None
    depth: int
    method: str
    code: str
    compiled: bool | None
    correct: bool | None
    correctness_detail: str | None
    time_ms: float | None
    speedup: float | None
    critique: str | None
    u_raw: float
    u_cat: int
    created_order: int
    wall_time: str
    # bookkeeping needed to rebuild trees and replay prompts
    perf_detail: str | None = None
    level: int = 0
    kind: str = "sample"
    selected: bool = False
    discarded: bool = False
    degraded: bool = False
    prompt_hash: str | None = None
    critic_prompt_hash: str | None = None
    critic_generator: str | None = None
    critic_level: int | None = None
    seed: int = 0
    gamma: float = 1.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "TrajectoryRecord":
        data = json.loads(line)
        if not isinstance(data, dict):
            raise LogError("record is not an object")
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise LogError(f"unexpected fields {sorted(extra)}")
        try:
            rec = cls(**data)
        except TypeError as exc:
            raise LogError(str(exc)) from None
        _check_types(rec)
        return rec


def _check_types(rec: TrajectoryRecord) -> None:
    if not isinstance(rec.created_order, int) or not isinstance(rec.depth, int):
        raise LogError("created_order and depth must be integers")
    if not isinstance(rec.code, str) or not isinstance(rec.node_id, str):
        raise LogError("code and node_id must be strings")
    if rec.parent_id is not None and rec.compiled is None:
        raise LogError("non-root record without feedback")


def now_stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def tree_records(tree: SearchTree, wall_time: str | None = None) -> list[TrajectoryRecord]:
    stamp = wall_time or now_stamp()
    selected = set(tree.selected)
    out = []
    for s in sorted(tree.nodes.values(), key=lambda n: n.order):
        fb = s.feedback
        out.append(
            TrajectoryRecord(
                run_id=tree.run_id,
                problem_id=tree.problem_id,
                node_id=s.node_id,
                parent_id=s.parent_id,
                depth=s.depth,
                method=tree.method,
                code=s.code,
                compiled=None if fb is None else fb.compiled,
                correct=None if fb is None else fb.correct,
                correctness_detail=None if fb is None else fb.correctness_detail,
                time_ms=None if fb is None else fb.time_ms,
                speedup=None if fb is None else fb.speedup,
                critique=None if s.critique is None else s.critique.text,
                u_raw=s.u_raw,
                u_cat=s.u_cat,
                created_order=s.order,
                wall_time=stamp,
                perf_detail=None if fb is None else fb.perf_detail,
                level=s.level,
                kind=s.kind,
                selected=s.node_id in selected,
                discarded=s.node_id in tree.discarded,
                degraded=s.node_id in tree.degraded,
                prompt_hash=tree.prompt_hashes.get(s.node_id),
                critic_prompt_hash=tree.critic_hashes.get(s.node_id),
                critic_generator=None if s.critique is None else s.critique.generator_id,
                critic_level=tree.critic_levels.get(s.node_id),
                seed=tree.seed,
                gamma=tree.gamma,
            )
        )
    return out


def record_state(rec: TrajectoryRecord, critic_variant: str | None) -> SearchState:
    fb = None
    if rec.parent_id is not None:
        fb = ExecFeedback(
            compiled=bool(rec.compiled),
            correct=bool(rec.correct),
            correctness_detail=rec.correctness_detail or "",
            time_ms=rec.time_ms,
            speedup=float(rec.speedup or 0.0),
            perf_detail=rec.perf_detail or "",
        )
    critique = None
    if rec.critique is not None:
        if critic_variant is None:
            raise LogError(f"{rec.node_id}: critique on a method without a critic")
        critique = Critique(rec.critique, critic_variant, rec.critic_generator or "")
    return SearchState(
        node_id=rec.node_id,
        parent_id=rec.parent_id,
        problem_id=rec.problem_id,
        depth=rec.depth,
        code=rec.code,
        feedback=fb,
        critique=critique,
        u_raw=rec.u_raw,
        u_cat=rec.u_cat,
        order=rec.created_order,
        level=rec.level,
        kind=rec.kind,
    )


def build_trees(records: Iterable[TrajectoryRecord]) -> list[SearchTree]:
    """Group records by run id (first-seen order) and rebuild each tree."""
    groups: dict[str, list[TrajectoryRecord]] = {}
    for rec in records:
        groups.setdefault(rec.run_id, []).append(rec)
    trees = []
    for run_id, recs in groups.items():
        recs.sort(key=lambda r: r.created_order)
        orders = [r.created_order for r in recs]
        if len(set(orders)) != len(orders):
            raise LogError(f"{run_id}: duplicate created_order")
        first = recs[0]
        variant = MethodSpec.parse(first.method.replace("-", ":", 1)).variant
        tree = SearchTree(run_id, first.method, first.seed, first.problem_id, first.gamma)
        for rec in recs:
            state = record_state(rec, variant.critic_variant)
            if state.parent_id is not None and state.parent_id not in tree.nodes:
                raise LogError(f"{rec.node_id}: parent {rec.parent_id} missing or out of order")
            tree.add(state)
            if rec.selected:
                tree.selected.append(rec.node_id)
            if rec.discarded:
                tree.discarded.add(rec.node_id)
            if rec.degraded:
                tree.degraded.add(rec.node_id)
            if rec.prompt_hash:
                tree.prompt_hashes[rec.node_id] = rec.prompt_hash
            if rec.critic_prompt_hash:
                tree.critic_hashes[rec.node_id] = rec.critic_prompt_hash
            if rec.critic_level is not None:
                tree.critic_levels[rec.node_id] = rec.critic_level
        trees.append(tree)
    return trees


@dataclass
class ReadResult:
    records: list[TrajectoryRecord]
    corrupt: int
    total: int

    @property
    def corrupt_fraction(self) -> float:
        return self.corrupt / self.total if self.total else 0.0


def iter_lines(path: str | Path) -> Iterator[str]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield line


def read_log(path: str | Path) -> ReadResult:
    records, corrupt, total = [], 0, 0
    for lineno, line in enumerate(iter_lines(path), 1):
        total += 1
        try:
            records.append(TrajectoryRecord.from_json(line))
        except (ValueError, LogError) as exc:
            corrupt += 1
            log.warning("%s:%d: skipping corrupt record (%s)", path, lineno, exc)
    return ReadResult(records, corrupt, total)


def strip_volatile(line: str) -> str:
    data = json.loads(line)
    for key in VOLATILE_FIELDS:
        data.pop(key, None)
    return json.dumps(data, ensure_ascii=False)


class LogWriter:
    """Append-only, single serialized sink; each write is flushed."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")
        self._lock = threading.Lock()
        self.count = 0

    def write_tree(self, tree: SearchTree) -> int:
        lines = [r.to_json() + "\n" for r in tree_records(tree)]
        with self._lock:
            self._fh.writelines(lines)
            self._fh.flush()
            self.count += len(lines)
        return len(lines)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_manifest(path: str | Path, manifest: dict) -> None:
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
