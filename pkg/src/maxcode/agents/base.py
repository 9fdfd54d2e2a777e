from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol

from .prompts import PromptContext

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


class AgentError(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentRequest:
    prompt: str
    temperature: float = 0.6
    max_tokens: int = 4096
    n: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


class Policy(Protocol):
    """Proposes candidate programs. ``ctx`` is optional; remote agents only read the prompt."""

    name: str

    def generate(self, request: AgentRequest, ctx: PromptContext | None = None) -> list[str]: ...


class Critic(Protocol):
    name: str

    def critique(self, request: AgentRequest, ctx: PromptContext | None = None) -> str: ...


def extract_code(completion: str, whole_fallback: bool = False) -> str:
    """First fenced code block; without one, empty text (or the whole completion if asked)."""
    m = _FENCE.search(completion)
    if m:
        return m.group(1).rstrip("\n")
    return completion.strip() if whole_fallback else ""


def generate_candidates(agent: Policy, request: AgentRequest, ctx: PromptContext | None = None) -> list[str]:
    texts = agent.generate(request, ctx)
    if len(texts) != request.n:
        raise AgentError(f"{agent.name} returned {len(texts)} candidates, expected {request.n}")
    return list(texts)
