"""Deterministic stand-ins for the policy and critic on simulated landscapes.

The scripted policy edits one parameter by one unit per proposal. With a
best-performing node in its context it edits the best node (hill
climbing); otherwise it edits the current state (a local random walk).
A critique carrying a ``hint: pK+`` / ``hint: pK-`` line steers the edit.
"""
from __future__ import annotations

import random
import re

from ..core import derive_seed
from ..environment.simulator import GrammarError, Landscape, format_params, parse_params
from .base import AgentRequest
from .prompts import PromptContext

_HINT = re.compile(r"hint: p(\d+)([+-])")


def _params(landscape: Landscape, code: str) -> list[int] | None:
    try:
        return parse_params(code, landscape.dim)
    except GrammarError:
        return None


def _state_params(landscape: Landscape, state) -> list[int]:
    if state is None or state.is_root:
        return list(landscape.baseline_params)
    parsed = _params(landscape, state.code)
    return parsed if parsed is not None else list(landscape.baseline_params)


def _step(params: list[int], axis: int, direction: int, extent: int) -> list[int]:
    out = list(params)
    v = out[axis] + direction
    if not 0 <= v < extent:
        v = out[axis] - direction
    out[axis] = min(max(v, 0), extent - 1)
    return out


def scripted_policy_step(
    landscape: Landscape, ctx: PromptContext, rng_seed: int, follow_hint: float = 0.7
) -> str:
    rng = random.Random(rng_seed)
    if ctx.best_node is not None:
        source = _state_params(landscape, ctx.best_node)
    else:
        source = _state_params(landscape, ctx.current)
    axis = rng.randrange(landscape.dim)
    direction = rng.choice((-1, 1))
    crit = ctx.current.critique
    if crit is not None:
        m = _HINT.search(crit.text)
        if m and int(m.group(1)) < landscape.dim and rng.random() < follow_hint:
            axis = int(m.group(1))
            direction = 1 if m.group(2) == "+" else -1
    return format_params(_step(source, axis, direction, landscape.extent))


class ScriptedPolicy:
    def __init__(self, landscapes: dict[str, Landscape], follow_hint: float = 0.7):
        self.landscapes = landscapes
        self.follow_hint = follow_hint
        self.name = "scripted-policy"

    def generate(self, request: AgentRequest, ctx: PromptContext | None = None) -> list[str]:
        if ctx is None:
            raise ValueError("scripted policy needs the prompt context")
        landscape = self.landscapes[ctx.problem.id]
        return [
            scripted_policy_step(landscape, ctx, derive_seed(request.seed, i), self.follow_hint)
            for i in range(request.n)
        ]


class ScriptedCritic:
    """Diagnoses simulated feedback; with probability ``accuracy`` the hint names the best neighbouring edit."""

    def __init__(self, landscapes: dict[str, Landscape], accuracy: float = 0.7):
        self.landscapes = landscapes
        self.accuracy = accuracy
        self.name = "scripted-critic"

    def critique(self, request: AgentRequest, ctx: PromptContext | None = None) -> str:
        if ctx is None:
            raise ValueError("scripted critic needs the prompt context")
        landscape = self.landscapes[ctx.problem.id]
        state = ctx.current
        fb = state.feedback
        rng = random.Random(request.seed)
        params = _params(landscape, state.code)
        if params is None or fb is None or not fb.compiled:
            return (
                "Diagnosis: the parameter list does not parse.\n"
                f"Suggestion: write every parameter p0..p{landscape.dim - 1} as 'pK=<integer>'."
            )
        if fb.correct:
            diagnosis = f"Diagnosis: correct, speedup {fb.speedup:.3f}x; the remaining bottleneck is parameter tuning."
            reference = fb.speedup
        else:
            diagnosis = f"Diagnosis: incorrect ({fb.correctness_detail})."
            reference = 0.0
        best = None
        for axis in range(landscape.dim):
            for direction in (1, -1):
                cand = _step(params, axis, direction, landscape.extent)
                if cand == params:
                    continue
                ok, s = landscape.evaluate_params(cand)
                if ok and s > reference and (best is None or s > best[0]):
                    best = (s, axis, direction)
        if best is not None and rng.random() < self.accuracy:
            _, axis, direction = best
        else:
            axis, direction = rng.randrange(landscape.dim), rng.choice((-1, 1))
        sign = "+" if direction > 0 else "-"
        return f"{diagnosis}\nSuggestion: adjust p{axis} by {direction:+d}.\nhint: p{axis}{sign}"
