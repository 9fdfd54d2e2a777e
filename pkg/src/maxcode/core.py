"""Domain types and the max-reward arithmetic shared by every search strategy.

Speedups are ratios throughout (2.0 means twice as fast as the baseline);
only :class:`RewardBins` thresholds are expressed in percent.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

NUM_CATEGORIES = 5
MAX_CATEGORY = NUM_CATEGORIES - 1


@dataclass(frozen=True)
class RewardBins:
    """Percent thresholds (s1, s2, s3) splitting speedups into categories 0-4."""

    s1: float
    s2: float
    s3: float

    def __post_init__(self):
        if not (100 < self.s1 < self.s2 < self.s3):
            raise ValueError(
                f"bins must satisfy 100 < s1 < s2 < s3, got ({self.s1}, {self.s2}, {self.s3})"
            )

    @classmethod
    def parse(cls, text: str) -> "RewardBins":
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated thresholds, got {text!r}")
        return cls(*(float(p) for p in parts))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.s1, self.s2, self.s3)


# Threshold sets used for KernelBench level 1, level 2 and PIE.
KERNELBENCH_L1_BINS = RewardBins(140, 320, 475)
KERNELBENCH_L2_BINS = RewardBins(120, 170, 215)
PIE_BINS = RewardBins(125, 180, 260)


@dataclass(frozen=True)
class IOPair:
    input: str
    expected_output: str


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    description: str
    baseline_code: str
    test_cases: tuple[IOPair, ...]
    bins: RewardBins = PIE_BINS
    baseline_time_ms: float | None = None
    timeout_ms: int = 10_000

    def __post_init__(self):
        if not self.test_cases:
            raise ValueError(f"problem {self.id!r} has no test cases")
        if self.baseline_time_ms is not None and self.baseline_time_ms <= 0:
            raise ValueError("baseline_time_ms must be positive")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")


@dataclass(frozen=True)
class ExecFeedback:
    compiled: bool
    correct: bool
    correctness_detail: str = ""
    time_ms: float | None = None
    speedup: float = 0.0
    perf_detail: str = ""

    def __post_init__(self):
        if self.correct and not self.compiled:
            raise ValueError("feedback cannot be correct without compiling")
        if not self.correct and self.speedup != 0:
            raise ValueError("incorrect feedback must carry speedup 0")
        if self.speedup < 0:
            raise ValueError("speedup must be nonnegative")
        if (self.time_ms is not None) != self.compiled:
            raise ValueError("time_ms is set exactly when the candidate compiled")

    @property
    def improving(self) -> bool:
        """Correct and strictly faster than the baseline."""
        return self.correct and self.speedup > 1.0


GENERATOR_VARIANTS = (
    "Base",
    "BestPerf",
    "Critique",
    "CritiqueBestPerf",
    "Traj",
    "TrajBestPerf",
    "TrajCritique",
    "TrajCritiqueBestPerf",
)
CRITIC_VARIANTS = ("Critique", "CritiqueBestPerf", "TrajCritique", "TrajCritiqueBestPerf")


@dataclass(frozen=True)
class Critique:
    text: str
    variant: str
    generator_id: str = ""

    def __post_init__(self):
        if self.variant not in CRITIC_VARIANTS:
            raise ValueError(f"unknown critic variant {self.variant!r}")


@dataclass(frozen=True)
class SearchState:
    """One node of a search tree: a candidate, its feedback and best-so-far trackers.

    ``order`` is the creation index within the tree and drives every
    tie-break. ``level`` is the search round that created the node and
    ``kind`` is one of ``root``, ``sample`` or ``repair``.
    """

    node_id: str
    parent_id: str | None
    problem_id: str
    depth: int
    code: str
    feedback: ExecFeedback | None = None
    critique: Critique | None = None
    u_raw: float = 1.0
    u_cat: int = 0
    order: int = 0
    level: int = 0
    kind: str = "sample"

    def __post_init__(self):
        if self.parent_id is None:
            if self.depth != 0 or self.feedback is not None:
                raise ValueError("root must have depth 0 and no feedback")
        else:
            if self.depth < 1:
                raise ValueError("non-root state must have depth >= 1")
            if self.feedback is None:
                raise ValueError("non-root state must carry feedback")
        if self.u_raw < 0:
            raise ValueError("u_raw must be nonnegative")
        if not 0 <= self.u_cat <= MAX_CATEGORY:
            raise ValueError("u_cat must lie in 0..4")

    @property
    def is_root(self) -> bool:
        return self.parent_id is None

    @property
    def speedup(self) -> float:
        return self.feedback.speedup if self.feedback is not None else 0.0

    @property
    def correct(self) -> bool:
        return self.feedback is not None and self.feedback.correct


@dataclass
class SearchTree:
    """All states visited by one (problem, method, seed) search.

    Besides the node map the tree records which nodes the search advanced
    to (``selected``), which repair-loop states were discarded, which
    branches were carried forward degraded, and whether the evaluation
    budget truncated the run.
    """

    run_id: str
    method: str
    seed: int
    problem_id: str
    gamma: float = 1.0
    nodes: dict[str, SearchState] = field(default_factory=dict)
    selected: list[str] = field(default_factory=list)
    discarded: set[str] = field(default_factory=set)
    degraded: set[str] = field(default_factory=set)
    prompt_hashes: dict[str, str] = field(default_factory=dict)
    critic_hashes: dict[str, str] = field(default_factory=dict)
    critic_levels: dict[str, int] = field(default_factory=dict)
    truncated: bool = False
    predictions: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")

    @property
    def root(self) -> SearchState:
        for node in self.nodes.values():
            if node.is_root:
                return node
        raise ValueError("tree has no root")

    def add(self, state: SearchState) -> SearchState:
        if state.node_id in self.nodes:
            raise ValueError(f"duplicate node id {state.node_id}")
        if state.is_root:
            if any(n.is_root for n in self.nodes.values()):
                raise ValueError("tree already has a root")
        elif state.parent_id not in self.nodes:
            raise ValueError(f"parent {state.parent_id} of {state.node_id} is not in the tree")
        self.nodes[state.node_id] = state
        return state

    def replace(self, state: SearchState) -> None:
        if state.node_id not in self.nodes:
            raise KeyError(state.node_id)
        self.nodes[state.node_id] = state

    def next_order(self) -> int:
        return len(self.nodes)

    def path(self, node_id: str) -> list[SearchState]:
        """States from the root down to ``node_id`` inclusive."""
        out = []
        cur: str | None = node_id
        seen = set()
        while cur is not None:
            if cur in seen:
                raise ValueError("cycle in parent links")
            seen.add(cur)
            node = self.nodes[cur]
            out.append(node)
            cur = node.parent_id
        out.reverse()
        return out

    def children(self, node_id: str) -> list[SearchState]:
        return [n for n in self.nodes.values() if n.parent_id == node_id]

    def evaluated(self) -> list[SearchState]:
        return [n for n in self.nodes.values() if n.feedback is not None]

    def max_depth(self) -> int:
        return max((n.depth for n in self.nodes.values()), default=0)


def max_reward_return(rewards: Sequence[float], gamma: float = 1.0) -> float:
    """Best discounted single reward: max over k of gamma**(k-1) * rewards[k]."""
    if not rewards:
        raise ValueError("empty trajectory")
    return max(gamma**k * r for k, r in enumerate(rewards))


def update_best_so_far(u_prev: float, reward: float, depth: int, gamma: float = 1.0) -> float:
    if depth < 1:
        raise ValueError("rewards are only observed at depth >= 1")
    return max(u_prev, gamma**depth * reward)


def bin_speedup(speedup: float, correct: bool, bins: RewardBins) -> int:
    if speedup < 0:
        raise ValueError("speedup must be nonnegative")
    if not correct:
        return 0
    # Compare ratios against percent/100: 3.2 * 100 overshoots 320 in binary
    # floating point, while 320 / 100 rounds to the same double as 3.2.
    if speedup <= 1.0:
        return 0
    if speedup <= bins.s1 / 100:
        return 1
    if speedup <= bins.s2 / 100:
        return 2
    if speedup <= bins.s3 / 100:
        return 3
    return 4


def to_category(value: float) -> int:
    """Largest valid category not above ``value``."""
    return max(0, min(MAX_CATEGORY, math.floor(value)))


def compute_value_target(u_cat: float, future: Sequence[int], gamma: float = 1.0) -> int:
    """Categorical value label: max(u/gamma, max_j gamma**j * future[j]) on the category grid.

    ``future`` starts at the labelled state's own reward.
    """
    if not future:
        raise ValueError("empty future sequence")
    best_future = max(gamma**j * c for j, c in enumerate(future))
    return to_category(max(u_cat / gamma, best_future))


def best_category_so_far(categories: Iterable[int], gamma: float = 1.0) -> float:
    """u_t over a prefix of categorical rewards: max over k of gamma**(k-1) * c_k."""
    best = 0.0
    for k, c in enumerate(categories):
        best = max(best, gamma**k * c)
    return best


def discounted_score(state: SearchState, gamma: float) -> float:
    return gamma ** (state.depth - 1) * state.speedup


def select_best_node(tree: SearchTree) -> SearchState:
    """Correct node maximising gamma**(depth-1) * speedup; the root when none is correct."""
    if not tree.nodes:
        raise ValueError("empty tree")
    best = None
    best_score = -1.0
    for node in sorted(tree.nodes.values(), key=lambda n: n.order):
        if not node.correct:
            continue
        score = discounted_score(node, tree.gamma)
        if score > best_score:
            best, best_score = node, score
    return best if best is not None else tree.root


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
