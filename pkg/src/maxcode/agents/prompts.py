"""Render generator, critic and reward-model prompts from template files.

A template is plain text with a ``----- USER -----`` separator line: the
part above is the system message, the part below the user message. The
user part places named blocks in a fixed order (problem, best, trajectory,
attempt, critique) followed by closing instructions. Every attempt,
critique and best-solution block opens with a bracketed marker so the
composition of a prompt can be checked by counting markers.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..core import CRITIC_VARIANTS, GENERATOR_VARIANTS, ExecFeedback, ProblemSpec, RewardBins, SearchState

USER_SEPARATOR = "----- USER -----"
ATTEMPT_MARK = "[ATTEMPT"
CRITIQUE_MARK = "[CRITIQUE"
BEST_MARK = "[BEST]"


class PromptContextError(ValueError):
    pass


@dataclass(frozen=True)
class PromptVariant:
    name: str
    uses_trajectory: bool
    uses_best_perf: bool
    uses_critique: bool

    @classmethod
    def named(cls, name: str) -> "PromptVariant":
        if name not in GENERATOR_VARIANTS:
            raise ValueError(f"unknown prompt variant {name!r}; expected one of {', '.join(GENERATOR_VARIANTS)}")
        return cls(
            name=name,
            uses_trajectory=name.startswith("Traj"),
            uses_best_perf=name.endswith("BestPerf"),
            uses_critique="Critique" in name,
        )

    def __post_init__(self):
        expected = (
            self.name.startswith("Traj"),
            self.name.endswith("BestPerf"),
            "Critique" in self.name,
        )
        if self.name not in GENERATOR_VARIANTS or expected != (
            self.uses_trajectory,
            self.uses_best_perf,
            self.uses_critique,
        ):
            raise ValueError(f"inconsistent flags for variant {self.name!r}")

    @property
    def critic_variant(self) -> str | None:
        return self.name if self.name in CRITIC_VARIANTS else None


@dataclass(frozen=True)
class PromptContext:
    """What a generation or critique call may condition on.

    ``ancestors`` runs from the root to ``current``. It follows the selected
    lineage, so states discarded by a completed repair loop may be skipped.
    """

    problem: ProblemSpec
    current: SearchState
    ancestors: tuple[SearchState, ...] = field(default_factory=tuple)
    best_node: SearchState | None = None
    u_raw: float = 1.0

    def __post_init__(self):
        if not self.ancestors:
            object.__setattr__(self, "ancestors", (self.current,))
        chain = self.ancestors
        if chain[-1].node_id != self.current.node_id:
            raise PromptContextError("ancestors must end at the current state")
        if not chain[0].is_root:
            raise PromptContextError("ancestors must start at the root")
        for a, b in zip(chain, chain[1:]):
            if b.depth <= a.depth:
                raise PromptContextError("ancestors must be ordered root to current")

    @property
    def attempts(self) -> list[SearchState]:
        return [s for s in self.ancestors if not s.is_root]


def format_feedback(fb: ExecFeedback | None) -> str:
    if fb is None:
        return "Execution feedback: none (not evaluated yet)"
    lines = [f"compiled={fb.compiled}", f"correctness={fb.correct}"]
    if not fb.compiled:
        lines.append(f"compilation error: {fb.correctness_detail}")
    elif not fb.correct:
        lines.append(f"correctness_issues: {fb.correctness_detail}")
    else:
        if fb.time_ms is not None:
            lines.append(f"runtime: {fb.time_ms:.3f} ms")
        lines.append(f"speedup: {fb.speedup:.3f}x")
        if fb.perf_detail:
            lines.append(f"performance: {fb.perf_detail}")
    return "Execution feedback:\n" + "\n".join(lines)


def _code(text: str) -> str:
    return f"```\n{text.rstrip()}\n```"


def _problem_block(problem: ProblemSpec) -> str:
    runtime = f" (running time {problem.baseline_time_ms:.3f} ms)" if problem.baseline_time_ms else ""
    return f"## Problem\n{problem.description.strip()}\n\n## Original code{runtime}\n{_code(problem.baseline_code)}"


def _attempt_block(state: SearchState, index: int, title: str, show_feedback: bool = True) -> str:
    body = f"### {ATTEMPT_MARK} {index}] {title} (depth {state.depth})\n{_code(state.code)}"
    if show_feedback:
        body += "\n" + format_feedback(state.feedback)
    return body


def _critique_block(state: SearchState, index: int) -> str:
    return f"### {CRITIQUE_MARK} {index}] Critique of attempt {index}\n{state.critique.text.strip()}"


def _best_block(ctx: PromptContext) -> str:
    best = ctx.best_node
    head = f"## {BEST_MARK} Best-performing solution so far (best speedup so far: {ctx.u_raw:.3f}x)"
    if best.is_root:
        return f"{head}\nNo attempt has beaten the original code yet; the original code (speedup 1.000x) is the best solution."
    return f"{head}\n{_code(best.code)}\n{format_feedback(best.feedback)}"


def _trajectory_block(previous: list[SearchState], with_critiques: bool) -> str:
    lines = ["## Trajectory of previous attempts"]
    if not previous:
        lines.append("(no previous attempts)")
    for i, state in enumerate(previous, start=1):
        lines.append(_attempt_block(state, i, "Previous attempt"))
        if with_critiques and state.critique is not None:
            lines.append(_critique_block(state, i))
    return "\n\n".join(lines)


# Template sets shipped with the package; any other value names a directory.
BUILTIN_TEMPLATE_SETS = {"kernelbench": (), "pie": ("pie",)}


@lru_cache(maxsize=None)
def _read_template(directory: str | None, name: str) -> str:
    if directory is None or directory in BUILTIN_TEMPLATE_SETS:
        sub = BUILTIN_TEMPLATE_SETS[directory or "kernelbench"]
        return resources.files("maxcode.agents").joinpath("templates", *sub, name).read_text()
    return (Path(directory) / name).read_text()


def load_template(name: str, directory: str | Path | None = None) -> tuple[str, str]:
    """Return (system, user) template parts for a template file name."""
    text = _read_template(None if directory is None else str(directory), name)
    if USER_SEPARATOR not in text:
        raise ValueError(f"template {name} lacks the {USER_SEPARATOR!r} separator")
    system, user = text.split(USER_SEPARATOR, 1)
    return system.strip(), user.strip("\n")


def _assemble(system: str, user_template: str, **blocks: str) -> str:
    user = user_template.format(**blocks)
    user = re.sub(r"\n{3,}", "\n\n", user).strip()
    return f"{system}\n{USER_SEPARATOR}\n{user}\n"


def split_prompt(prompt: str) -> tuple[str, str]:
    system, _, user = prompt.partition(f"\n{USER_SEPARATOR}\n")
    return system, user


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def _check_context(ctx: PromptContext, uses_best: bool, uses_critique: bool) -> None:
    if uses_best and ctx.best_node is None:
        raise PromptContextError("best_node is required for best-performance variants")
    if uses_critique and not ctx.current.is_root and ctx.current.critique is None:
        raise PromptContextError("current.critique is required for critique variants")


def render_generator_prompt(variant: PromptVariant, ctx: PromptContext, template_dir=None) -> str:
    _check_context(ctx, variant.uses_best_perf, variant.uses_critique)
    attempts = ctx.attempts
    latest = attempts[-1] if attempts else None
    n = len(attempts)
    trajectory = _trajectory_block(attempts[:-1], variant.uses_critique) if variant.uses_trajectory else ""
    attempt = _attempt_block(latest, n, "Latest attempt") if latest else ""
    critique = _critique_block(latest, n) if variant.uses_critique and latest else ""
    system, user = load_template(f"generator_{variant.name}.txt", template_dir)
    return _assemble(
        system,
        user,
        problem=_problem_block(ctx.problem),
        best=_best_block(ctx) if variant.uses_best_perf else "",
        trajectory=trajectory,
        attempt=attempt,
        critique=critique,
    )


def critic_focus(state: SearchState) -> str:
    fb = state.feedback
    if fb is None or not fb.compiled:
        return ("Focus: the latest attempt failed to compile. Diagnose why it fails to compile, "
                "then give actionable suggestions so it compiles and is correct.")
    if not fb.correct:
        return ("Focus: the latest attempt compiled but is incorrect. Diagnose why it is incorrect, "
                "then give actionable suggestions so it becomes correct.")
    return ("Focus: the latest attempt is correct. Diagnose the potential bottleneck of running time, "
            "then give actionable suggestions to reduce running time.")


def render_critic_prompt(variant: str, ctx: PromptContext, template_dir=None) -> str:
    if variant not in CRITIC_VARIANTS:
        raise PromptContextError(f"{variant!r} is not a critic variant; expected one of {', '.join(CRITIC_VARIANTS)}")
    flags = PromptVariant.named(variant)
    if ctx.current.is_root:
        raise PromptContextError("the root state has no attempt to critique")
    if flags.uses_best_perf and ctx.best_node is None:
        raise PromptContextError("best_node is required for best-performance variants")
    attempts = ctx.attempts
    n = len(attempts)
    system, user = load_template(f"critic_{variant}.txt", template_dir)
    return _assemble(
        system,
        user,
        problem=_problem_block(ctx.problem),
        best=_best_block(ctx) if flags.uses_best_perf else "",
        trajectory=_trajectory_block(attempts[:-1], True) if flags.uses_trajectory else "",
        attempt=_attempt_block(attempts[-1], n, "Latest attempt"),
        focus=critic_focus(ctx.current),
    )


def render_reward_prompt(
    problem: ProblemSpec,
    history: list[SearchState],
    candidate_code: str,
    remaining_rounds: int,
    bins: RewardBins | None = None,
    template_dir=None,
) -> str:
    """Reward-model prompt: evaluated history, then the newest attempt without feedback."""
    bins = bins or problem.bins
    n = len(history) + 1
    attempt = f"### {ATTEMPT_MARK} {n}] Most recent attempt\n{_code(candidate_code)}"
    system, user = load_template("reward.txt", template_dir)
    system = system.format(s1=_pct(bins.s1), s2=_pct(bins.s2), s3=_pct(bins.s3))
    return _assemble(
        system,
        user,
        problem=_problem_block(problem),
        trajectory=_trajectory_block(history, True),
        attempt=attempt,
        remaining_rounds=str(remaining_rounds),
    )


def _pct(v: float) -> str:
    return f"{v:g}"
