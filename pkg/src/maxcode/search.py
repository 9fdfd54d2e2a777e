"""Search strategies over (state, best-so-far) with strict evaluation accounting.

Four algorithms share one engine:

* ``flat``: n independent samples from the root.
* ``single_path``: one refinement chain (Effi-Learner shape at depth 2).
* ``beam``: k samples per level, advance to the fastest improving one,
  repair loop when none improves (CUDA-LLM shape).
* ``value_guided``: like ``beam`` but oversamples m candidates and only
  evaluates the k with the highest predicted value.

The prompt variant decides what the policy sees; critique variants also
call the critic on every state before it is refined.
"""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .agents.base import AgentRequest, Critic, Policy, generate_candidates
from .agents.prompts import (
    PromptContext,
    PromptVariant,
    prompt_hash,
    render_critic_prompt,
    render_generator_prompt,
    render_reward_prompt,
)
from .core import (
    Critique,
    ExecFeedback,
    ProblemSpec,
    SearchState,
    SearchTree,
    best_category_so_far,
    bin_speedup,
    derive_seed,
    discounted_score,
    to_category,
    update_best_so_far,
)
from .valuedata import Predictor, predict_value, ranking_key

log = logging.getLogger(__name__)

ALGORITHMS = ("flat", "single_path", "beam", "value_guided")


class SearchConfigError(ValueError):
    pass


class BudgetExhausted(Exception):
    pass


class Executor(Protocol):
    def evaluate(self, problem: ProblemSpec, code: str) -> ExecFeedback: ...


@dataclass
class SearchBudget:
    max_evaluations: int
    max_depth: int = 8
    beam_width_k: int = 8
    repair_cap: int = 4
    oversample_m: int | None = None
    evaluations_used: int = 0

    def __post_init__(self):
        if self.oversample_m is None:
            self.oversample_m = self.beam_width_k
        for name in ("max_evaluations", "max_depth", "beam_width_k", "repair_cap", "oversample_m"):
            if getattr(self, name) < 1:
                raise SearchConfigError(f"{name} must be positive")
        if self.oversample_m < self.beam_width_k:
            raise SearchConfigError("oversample_m must be >= beam_width_k")

    @property
    def remaining(self) -> int:
        return self.max_evaluations - self.evaluations_used

    def fresh(self) -> "SearchBudget":
        return dataclasses.replace(self, evaluations_used=0)


@dataclass(frozen=True)
class MethodSpec:
    algorithm: str
    variant: PromptVariant = field(default_factory=lambda: PromptVariant.named("Base"))
    use_critic: bool | None = None
    gamma: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise SearchConfigError(f"unknown algorithm {self.algorithm!r}")
        # flat samples all come from the root, so there is no context to enrich
        if self.algorithm == "flat" and self.variant.name != "Base":
            raise SearchConfigError(f"flat sampling only takes the Base variant, got {self.variant.name}")
        if self.use_critic is None:
            object.__setattr__(self, "use_critic", self.variant.uses_critique)
        if self.use_critic != self.variant.uses_critique:
            raise SearchConfigError("use_critic must match whether the variant uses critiques")
        if not 0 < self.gamma <= 1:
            raise SearchConfigError("gamma must lie in (0, 1]")

    @property
    def name(self) -> str:
        return f"{self.algorithm}-{self.variant.name}"

    @classmethod
    def parse(cls, text: str, gamma: float = 1.0) -> "MethodSpec":
        """``algorithm[:Variant]``, e.g. ``beam:TrajCritiqueBestPerf``."""
        algo, _, variant = text.strip().partition(":")
        return cls(algo.strip(), PromptVariant.named(variant.strip() or "Base"), gamma=gamma)


@dataclass(frozen=True)
class SearchSettings:
    seed: int = 0
    temperature: float = 0.6
    critic_temperature: float | None = None
    max_tokens: int = 4096
    workers: int = 1
    template_dir: str | None = None
    run_id: str | None = None


def lineage(tree: SearchTree, state: SearchState, level: int) -> list[SearchState]:
    """Root-to-``state`` path minus repair states discarded before ``level``."""
    return [
        s
        for s in tree.path(state.node_id)
        if not (s.node_id in tree.discarded and s.level < level)
    ]


def generation_context(
    tree: SearchTree, problem: ProblemSpec, state: SearchState, level: int, with_best: bool
) -> PromptContext:
    """The context a level-``level`` generation from ``state`` is rendered with."""
    chain = lineage(tree, state, level)
    best = None
    if with_best:
        best = chain[0]
        best_score = -1.0
        for s in chain:
            score = discounted_score(s, tree.gamma)
            if s.correct and score > best_score:
                best, best_score = s, score
    return PromptContext(problem, state, tuple(chain), best, state.u_raw)


class _Engine:
    def __init__(
        self,
        problem: ProblemSpec,
        agent: Policy,
        executor: Executor,
        method: MethodSpec,
        budget: SearchBudget,
        critic: Critic | None = None,
        predictor: Predictor | None = None,
        settings: SearchSettings | None = None,
    ):
        if method.use_critic and critic is None:
            raise SearchConfigError(f"method {method.name} needs a critic")
        if method.algorithm == "value_guided" and predictor is None:
            raise SearchConfigError("value-guided search needs a value predictor")
        self.problem = problem
        self.agent = agent
        self.executor = executor
        self.method = method
        self.budget = budget
        self.critic = critic
        self.predictor = predictor
        self.settings = settings or SearchSettings()
        run_id = self.settings.run_id or f"{problem.id}.{method.name}.s{self.settings.seed}"
        self.tree = SearchTree(run_id, method.name, self.settings.seed, problem.id, method.gamma)
        self.tree.add(SearchState(self._id(0), None, problem.id, 0, problem.baseline_code, kind="root"))

    def _id(self, order: int) -> str:
        return f"{self.tree.run_id}:n{order}"

    def _seed(self, state: SearchState, tag: str) -> int:
        return derive_seed(self.settings.seed, self.problem.id, state.order, tag)

    def context(self, state: SearchState, level: int, with_best: bool) -> PromptContext:
        return generation_context(self.tree, self.problem, state, level, with_best)

    def ensure_critique(self, state: SearchState, level: int) -> SearchState:
        if not self.method.use_critic or state.is_root or state.critique is not None:
            return state
        variant = self.method.variant.critic_variant
        ctx = self.context(state, level, self.method.variant.uses_best_perf)
        prompt = render_critic_prompt(variant, ctx, self.settings.template_dir)
        temp = self.settings.critic_temperature
        request = AgentRequest(
            prompt,
            temperature=self.settings.temperature if temp is None else temp,
            max_tokens=self.settings.max_tokens,
            n=1,
            seed=self._seed(state, "critic"),
        )
        text = self.critic.critique(request, ctx)
        updated = dataclasses.replace(state, critique=Critique(text, variant, self.critic.name))
        self.tree.replace(updated)
        self.tree.critic_hashes[state.node_id] = prompt_hash(prompt)
        self.tree.critic_levels[state.node_id] = level
        return updated

    def propose(self, state: SearchState, level: int, n: int, tag: str) -> tuple[list[str], str, PromptContext]:
        state = self.ensure_critique(state, level)
        ctx = self.context(state, level, self.method.variant.uses_best_perf)
        prompt = render_generator_prompt(self.method.variant, ctx, self.settings.template_dir)
        request = AgentRequest(
            prompt,
            temperature=self.settings.temperature,
            max_tokens=self.settings.max_tokens,
            n=n,
            seed=self._seed(state, tag),
        )
        return generate_candidates(self.agent, request, ctx), prompt_hash(prompt), ctx

    def evaluate(self, jobs: Sequence[tuple[SearchState, str, str]], level: int, kind: str) -> list[SearchState]:
        """Evaluate (parent, code, prompt_hash) jobs; nodes are created in job order."""
        allowed = list(jobs[: max(0, self.budget.remaining)])
        if self.settings.workers > 1 and len(allowed) > 1:
            with ThreadPoolExecutor(self.settings.workers) as pool:
                feedback = list(pool.map(lambda job: self.executor.evaluate(self.problem, job[1]), allowed))
        else:
            feedback = [self.executor.evaluate(self.problem, code) for _, code, _ in allowed]
        created = []
        for (parent, code, phash), fb in zip(allowed, feedback):
            self.budget.evaluations_used += 1
            order = self.tree.next_order()
            depth = parent.depth + 1
            path_cats = [bin_speedup(s.speedup, s.correct, self.problem.bins) for s in self.tree.path(parent.node_id)[1:]]
            path_cats.append(bin_speedup(fb.speedup, fb.correct, self.problem.bins))
            state = SearchState(
                node_id=self._id(order),
                parent_id=parent.node_id,
                problem_id=self.problem.id,
                depth=depth,
                code=code,
                feedback=fb,
                u_raw=update_best_so_far(parent.u_raw, fb.speedup, depth, self.tree.gamma),
                u_cat=to_category(best_category_so_far(path_cats, self.tree.gamma)),
                order=order,
                level=level,
                kind=kind,
            )
            self.tree.add(state)
            self.tree.prompt_hashes[state.node_id] = phash
            created.append(state)
        if len(allowed) < len(jobs):
            raise BudgetExhausted
        return created

    @staticmethod
    def fastest_improving(states: Sequence[SearchState]) -> SearchState | None:
        best = None
        for s in sorted(states, key=lambda s: s.order):
            if s.feedback.improving and (best is None or s.speedup > best.speedup):
                best = s
        return best

    def repair(self, intermediates: Sequence[SearchState], level: int) -> SearchState:
        pool = list(intermediates)
        frontier = list(intermediates)
        chosen = None
        for r in range(1, self.budget.repair_cap + 1):
            jobs = []
            for s in frontier:
                texts, phash, _ = self.propose(s, level, 1, f"repair{r}")
                jobs.append((self.tree.nodes[s.node_id], texts[0], phash))
            frontier = self.evaluate(jobs, level, "repair")
            pool.extend(frontier)
            chosen = self.fastest_improving(frontier)
            if chosen is not None:
                break
        if chosen is None:
            chosen = min(pool, key=lambda s: (not s.correct, not s.feedback.compiled, s.order))
            self.tree.degraded.add(chosen.node_id)
            log.info("%s level %d: repair cap reached, carrying %s forward degraded", self.tree.run_id, level, chosen.node_id)
        self.tree.discarded.update(s.node_id for s in pool if s.node_id != chosen.node_id)
        return self.tree.nodes[chosen.node_id]

    def filter_candidates(self, texts: list[str], ctx: PromptContext, level: int, k: int) -> list[int]:
        current = ctx.current
        history = [s for s in ctx.ancestors if not s.is_root]
        remaining = max(0, self.budget.max_depth - level)
        try:
            scored = []
            for i, code in enumerate(texts):
                render = render_reward_prompt(self.problem, history, code, remaining, template_dir=self.settings.template_dir)
                value = predict_value(
                    self.predictor, render, current.u_cat, remaining, problem_id=self.problem.id, code=code
                )
                self.tree.predictions += 1
                scored.append((ranking_key(value, i), i))
        except Exception:
            log.exception("%s level %d: predictor failed, evaluating the first %d candidates", self.tree.run_id, level, k)
            return list(range(k))
        return sorted(i for _, i in sorted(scored)[:k])

    # algorithms

    def flat(self, n: int) -> None:
        root = self.tree.root
        texts, phash, _ = self.propose(root, 1, n, "flat")
        self.evaluate([(root, t, phash) for t in texts], 1, "sample")

    def single_path(self, depth: int) -> None:
        current = self.tree.root
        for level in range(1, depth + 1):
            texts, phash, _ = self.propose(current, level, 1, "step")
            current = self.evaluate([(self.tree.nodes[current.node_id], texts[0], phash)], level, "sample")[0]
            self.tree.selected.append(current.node_id)

    def beam(self, depth: int, k: int, m: int | None = None) -> None:
        current = self.tree.root
        for level in range(1, depth + 1):
            n = m if m is not None else k
            texts, phash, ctx = self.propose(current, level, n, "beam")
            keep = range(len(texts)) if n == k else self.filter_candidates(texts, ctx, level, k)
            parent = self.tree.nodes[current.node_id]
            children = self.evaluate([(parent, texts[i], phash) for i in keep], level, "sample")
            nxt = self.fastest_improving(children)
            if nxt is None:
                nxt = self.repair(children, level)
            current = nxt
            self.tree.selected.append(current.node_id)

    def run(self, fn, *args) -> SearchTree:
        try:
            fn(*args)
        except BudgetExhausted:
            self.tree.truncated = True
            log.info("%s: evaluation budget exhausted after %d evaluations", self.tree.run_id, self.budget.evaluations_used)
        return self.tree


def run_flat_sampling(problem, agent, executor, n, budget=None, method=None, settings=None) -> SearchTree:
    budget = budget or SearchBudget(max_evaluations=n)
    method = method or MethodSpec("flat")
    engine = _Engine(problem, agent, executor, method, budget, settings=settings)
    return engine.run(engine.flat, n)


def run_single_path(problem, agent, critic, executor, depth, method, budget=None, settings=None) -> SearchTree:
    if depth < 1:
        raise SearchConfigError("depth must be >= 1")
    budget = budget or SearchBudget(max_evaluations=depth, max_depth=depth)
    engine = _Engine(problem, agent, executor, method, budget, critic=critic, settings=settings)
    return engine.run(engine.single_path, depth)


def run_beam(problem, agent, critic, executor, depth, k, method, budget=None, settings=None) -> SearchTree:
    if k < 1 or depth < 1:
        raise SearchConfigError("depth and k must be >= 1")
    budget = budget or SearchBudget(max_evaluations=depth * k * 8, max_depth=depth, beam_width_k=k)
    engine = _Engine(problem, agent, executor, method, budget, critic=critic, settings=settings)
    return engine.run(engine.beam, depth, k)


def run_value_guided(
    problem, agent, critic, executor, predictor, depth, k, m, method, budget=None, settings=None
) -> SearchTree:
    if m < k:
        raise SearchConfigError("m must be >= k")
    budget = budget or SearchBudget(max_evaluations=depth * k * 8, max_depth=depth, beam_width_k=k, oversample_m=m)
    engine = _Engine(problem, agent, executor, method, budget, critic=critic, predictor=predictor, settings=settings)
    return engine.run(engine.beam, depth, k, m)


def repair_loop(engine: _Engine, intermediate_states: Sequence[SearchState], level: int = 1) -> SearchState:
    """Run the repair procedure of ``engine`` on a set of non-improving states."""
    return engine.repair(intermediate_states, level)


def run_method(
    problem: ProblemSpec,
    method: MethodSpec,
    agent: Policy,
    executor: Executor,
    budget: SearchBudget,
    critic: Critic | None = None,
    predictor: Predictor | None = None,
    settings: SearchSettings | None = None,
    flat_n: int | None = None,
) -> SearchTree:
    """Dispatch one (problem, method) cell with a fresh copy of ``budget``."""
    budget = budget.fresh()
    if method.algorithm == "flat":
        return run_flat_sampling(problem, agent, executor, flat_n or budget.max_evaluations, budget, method, settings)
    if method.algorithm == "single_path":
        return run_single_path(problem, agent, critic, executor, budget.max_depth, method, budget, settings)
    if method.algorithm == "beam":
        return run_beam(problem, agent, critic, executor, budget.max_depth, budget.beam_width_k, method, budget, settings)
    return run_value_guided(
        problem,
        agent,
        critic,
        executor,
        predictor,
        budget.max_depth,
        budget.beam_width_k,
        budget.oversample_m,
        method,
        budget,
        settings,
    )
