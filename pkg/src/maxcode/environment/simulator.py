"""Deterministic synthetic optimisation landscapes.

A candidate "program" is a list of integer parameters written as
``p0=3; p1=7`` (semicolons or newlines). Its speedup is a seed-derived
multimodal function of the parameters and its correctness is a
seed-derived modular constraint, so search behaviour can be checked
against exhaustive enumeration.
"""
from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .. import kernels
from ..core import ExecFeedback, IOPair, ProblemSpec, PIE_BINS, RewardBins

_ASSIGN = re.compile(r"^p(\d+)\s*=\s*(-?\d+)$")

MAX_GRID_POINTS = 10**6


class GrammarError(ValueError):
    pass


def format_params(params: Sequence[int]) -> str:
    return "; ".join(f"p{i}={int(v)}" for i, v in enumerate(params))


def parse_params(code: str, dim: int) -> list[int]:
    """Parse ``p0=..; p1=..`` text into ``dim`` integers or raise GrammarError."""
    values: dict[int, int] = {}
    for raw in re.split(r"[;\n]", code):
        item = raw.strip()
        if not item:
            continue
        m = _ASSIGN.match(item)
        if not m:
            raise GrammarError(f"cannot parse {item!r}")
        idx = int(m.group(1))
        if idx in values:
            raise GrammarError(f"p{idx} assigned twice")
        values[idx] = int(m.group(2))
    if sorted(values) != list(range(dim)):
        raise GrammarError(f"expected parameters p0..p{dim - 1}, got {sorted(values)}")
    return [values[i] for i in range(dim)]


@dataclass(frozen=True)
class _Model:
    centers: np.ndarray
    heights: np.ndarray
    widths: np.ndarray
    coef: np.ndarray
    offset: int
    modulus: int
    cutoff: int
    extent: int
    base_peak: float
    span: float


@dataclass(frozen=True)
class Landscape:
    """Seeded landscape over the integer box [0, extent)^dim.

    The global peak sits at ``optimum_params`` with speedup exactly
    ``optimum_speedup``; the baseline vector scores exactly 1.0. Roughly a
    ``correctness_threshold`` fraction of the box fails the correctness
    constraint.
    """

    seed: int
    dim: int = 3
    extent: int = 12
    optimum_speedup: float = 4.0
    correctness_threshold: float = 0.2
    n_peaks: int = 3
    _model: _Model = field(init=False, repr=False, compare=False)
    optimum_params: tuple[int, ...] = field(init=False, compare=False)
    baseline_params: tuple[int, ...] = field(init=False, compare=False)

    def __post_init__(self):
        if self.dim < 1 or self.extent < 2:
            raise ValueError("landscape needs dim >= 1 and extent >= 2")
        if self.optimum_speedup <= 1.0:
            raise ValueError("optimum_speedup must exceed 1")
        if not 0 <= self.correctness_threshold < 1:
            raise ValueError("correctness_threshold must lie in [0, 1)")
        rng = random.Random(self.seed)
        d, n = self.dim, self.extent
        optimum = tuple(rng.randrange(n) for _ in range(d))
        centers = [list(map(float, optimum))]
        heights = [1.0]
        widths = [n * rng.uniform(0.3, 0.45)]
        for _ in range(self.n_peaks):
            centers.append([float(rng.randrange(n)) for _ in range(d)])
            heights.append(rng.uniform(0.3, 0.6))
            widths.append(rng.uniform(1.0, 2.0))
        modulus = 97
        coef = [rng.randrange(1, modulus) for _ in range(d)]
        # Put the optimum on the highest residue so it is always feasible.
        offset = (modulus - 1 - sum(c * v for c, v in zip(coef, optimum))) % modulus
        cutoff = math.ceil(self.correctness_threshold * modulus)
        partial = _Model(
            centers=np.asarray(centers, dtype=np.float64),
            heights=np.asarray(heights, dtype=np.float64),
            widths=np.asarray(widths, dtype=np.float64),
            coef=np.asarray(coef, dtype=np.int64),
            offset=offset,
            modulus=modulus,
            cutoff=cutoff,
            extent=n,
            base_peak=0.0,
            span=1.0,
        )
        # Baseline: the lowest-peak feasible point among a handful of draws.
        draws = []
        for _ in range(1000):
            p = tuple(rng.randrange(n) for _ in range(d))
            ok, _ = kernels.evaluate_points(np.asarray([p]), partial)
            if ok[0] and p != optimum:
                draws.append(p)
                if len(draws) == 8:
                    break
        if not draws:
            raise ValueError("landscape has no feasible baseline point besides the optimum")
        peaks = [self._raw_peak(p, partial) for p in draws]
        i_base = min(range(len(draws)), key=lambda i: (peaks[i], i))
        model = _Model(
            centers=partial.centers,
            heights=partial.heights,
            widths=partial.widths,
            coef=partial.coef,
            offset=offset,
            modulus=modulus,
            cutoff=cutoff,
            extent=n,
            base_peak=peaks[i_base],
            span=self.optimum_speedup - 1.0,
        )
        object.__setattr__(self, "_model", model)
        object.__setattr__(self, "optimum_params", optimum)
        object.__setattr__(self, "baseline_params", draws[i_base])

    @staticmethod
    def _raw_peak(p, model: _Model) -> float:
        peak = 0.0
        for center, height, width in zip(model.centers.tolist(), model.heights.tolist(), model.widths.tolist()):
            d2 = 0.0
            for v, c in zip(p, center):
                diff = v - c
                d2 += diff * diff
            peak = max(peak, height * math.exp(-d2 / (2.0 * width * width)))
        return peak

    @property
    def model(self) -> _Model:
        return self._model

    @cached_property
    def top_speedup(self) -> float:
        # 1 + (optimum - 1) as the kernels compute it; equals optimum_speedup up to rounding.
        return 1.0 + self._model.span

    @property
    def full_bounds(self) -> list[tuple[int, int]]:
        return [(0, self.extent - 1)] * self.dim

    def evaluate_params(self, params: Sequence[int]) -> tuple[bool, float]:
        ok, s = kernels.evaluate_points(np.asarray([list(params)], dtype=np.int64), self._model)
        return bool(ok[0]), float(s[0])

    def problem(self, problem_id: str | None = None, bins: RewardBins = PIE_BINS) -> ProblemSpec:
        return ProblemSpec(
            id=problem_id or f"sim-{self.seed}",
            description=(
                f"Tune {self.dim} integer parameters p0..p{self.dim - 1}, each in "
                f"[0, {self.extent - 1}], to maximise speedup while staying correct."
            ),
            baseline_code=format_params(self.baseline_params),
            test_cases=(IOPair("", ""),),
            bins=bins,
        )


def simulate_evaluate(landscape: Landscape, code: str) -> ExecFeedback:
    try:
        params = parse_params(code, landscape.dim)
    except GrammarError as exc:
        return ExecFeedback(compiled=False, correct=False, correctness_detail=f"parse error: {exc}")
    ok, speedup = landscape.evaluate_params(params)
    # Pseudo-time keeps time_ms meaningful: baseline runs in 100 ms.
    if not ok:
        out_of_range = [i for i, v in enumerate(params) if not 0 <= v < landscape.extent]
        detail = (
            f"parameter p{out_of_range[0]} out of range [0, {landscape.extent - 1}]"
            if out_of_range
            else "constraint violated: outputs differ from expected"
        )
        return ExecFeedback(compiled=True, correct=False, correctness_detail=detail, time_ms=0.0)
    time_ms = 100.0 / speedup if speedup > 0 else math.inf
    return ExecFeedback(
        compiled=True,
        correct=True,
        correctness_detail="all tests passed",
        time_ms=time_ms,
        speedup=speedup,
        perf_detail=f"simulated runtime {time_ms:.3f} ms (baseline 100.000 ms)",
    )


def oracle_optimum(
    landscape: Landscape, param_bounds: Sequence[tuple[int, int]] | None = None
) -> tuple[tuple[int, ...], float]:
    """Exhaustive best correct point within inclusive per-dimension bounds."""
    bounds = list(param_bounds) if param_bounds is not None else landscape.full_bounds
    if len(bounds) != landscape.dim:
        raise ValueError(f"expected {landscape.dim} bounds, got {len(bounds)}")
    size = 1
    for lo, hi in bounds:
        size *= max(0, hi - lo + 1)
    if size > MAX_GRID_POINTS:
        raise ValueError(f"grid of {size} points exceeds the {MAX_GRID_POINTS} limit")
    lo = np.asarray([b[0] for b in bounds], dtype=np.int64)
    hi = np.asarray([b[1] for b in bounds], dtype=np.int64)
    best, speed, _ = kernels.grid_best(lo, hi, landscape.model)
    if best is None:
        raise ValueError("no feasible point")
    return tuple(int(v) for v in best), float(speed)


def reachable_best(landscape: Landscape, params: Sequence[int], radius: int) -> float:
    """Best correct speedup within ``radius`` single-coordinate unit edits; -1 if none."""
    return float(kernels.ball_best(np.asarray(list(params), dtype=np.int64), int(radius), landscape.model))


class SimulatedExecutor:
    """Executor contract over a map of problem id to landscape."""

    def __init__(self, landscapes: dict[str, Landscape]):
        self.landscapes = landscapes
        self.calls = 0

    def evaluate(self, problem: ProblemSpec, code: str) -> ExecFeedback:
        self.calls += 1
        return simulate_evaluate(self.landscapes[problem.id], code)
