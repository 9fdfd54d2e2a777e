"""Chat-completions client and the remote policy/critic built on it."""
from __future__ import annotations

import logging
import os
import threading
import time

import httpx

from .base import AgentError, AgentRequest, extract_code
from .prompts import PromptContext, split_prompt

log = logging.getLogger(__name__)

API_KEY_ENV = "MAXCODE_API_KEY"
API_BASE_ENV = "MAXCODE_API_BASE"
RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class ChatClient:
    """Minimal client for an OpenAI-style ``/chat/completions`` endpoint.

    Each request retries independently with exponential backoff; at most
    ``max_in_flight`` requests are outstanding across threads.
    """

    def __init__(
        self,
        model: str,
        base_url: str | None = None,
        api_key: str | None = None,
        max_retries: int = 3,
        backoff_s: float = 1.0,
        timeout_s: float = 300.0,
        max_in_flight: int = 8,
        transport: httpx.BaseTransport | None = None,
    ):
        self.model = model
        self.base_url = (base_url or os.environ.get(API_BASE_ENV) or "https://api.openai.com/v1").rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._http = httpx.Client(timeout=timeout_s, transport=transport)

    def close(self):
        self._http.close()

    def _post(self, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._http.post(url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last = exc
                log.warning("chat request failed (%s), attempt %d", exc, attempt + 1)
                continue
            if resp.status_code in RETRY_STATUS:
                last = AgentError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                log.warning("chat request returned %d, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise AgentError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return resp.json()
        raise AgentError(f"chat request failed after {self.max_retries + 1} attempts: {last}")

    def complete(self, prompt: str, temperature: float, n: int, max_tokens: int, seed: int | None = None) -> list[str]:
        """Return exactly ``n`` completion texts for a rendered prompt."""
        system, user = split_prompt(prompt)
        messages = [{"role": "user", "content": user or system}]
        if user and system:
            messages.insert(0, {"role": "system", "content": system})
        out: list[str] = []
        while len(out) < n:
            payload = {
                "model": self.model,
                "messages": messages,
                "temperature": temperature,
                "n": n - len(out),
                "max_tokens": max_tokens,
            }
            if seed is not None:
                payload["seed"] = seed
            data = self._post(payload)
            choices = data.get("choices") or []
            if not choices:
                raise AgentError("response carried no choices")
            for choice in choices[: n - len(out)]:
                out.append((choice.get("message") or {}).get("content") or "")
        return out


class RemoteAgent:
    def __init__(self, client: ChatClient, whole_fallback: bool = False):
        self.client = client
        self.whole_fallback = whole_fallback
        self.name = f"remote:{client.model}"

    def generate(self, request: AgentRequest, ctx: PromptContext | None = None) -> list[str]:
        completions = self.client.complete(
            request.prompt, request.temperature, request.n, request.max_tokens, request.seed
        )
        return [extract_code(c, self.whole_fallback) for c in completions]


class RemoteCritic:
    def __init__(self, client: ChatClient):
        self.client = client
        self.name = f"remote:{client.model}"

    def critique(self, request: AgentRequest, ctx: PromptContext | None = None) -> str:
        return self.client.complete(request.prompt, request.temperature, 1, request.max_tokens, request.seed)[0].strip()
