"""Minimal OpenAI-compatible chat-completions client.

Speaks POST {base}/v1/chat/completions with a bearer token. Transport
failures and 429s are retried with exponential backoff and do not count
against content-level attempt budgets; an optional requests-per-minute
limiter paces outgoing calls across threads.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field

import httpx


class ChatError(Exception):
    """Transport or protocol failure after exhausting backoff retries."""


@dataclass(frozen=True)
class BackoffPolicy:
    initial_ms: int = 200
    multiplier: float = 2.0
    max_ms: int = 5000
    max_retries: int = 5

    def __post_init__(self):
        if self.initial_ms <= 0 or self.multiplier < 1.0:
            raise ValueError("backoff must be positive and monotone")

    def delays(self):
        delay = self.initial_ms
        for _ in range(self.max_retries):
            yield delay / 1000.0
            delay = min(self.max_ms, delay * self.multiplier)


@dataclass(frozen=True)
class GenPolicy:
    max_attempts: int = 3  # content-level retries (invalid responses)
    temperature: float = 0.7
    max_tokens: int = 512
    backoff: BackoffPolicy = field(default_factory=BackoffPolicy)
    requests_per_minute: float | None = None


class RateLimiter:
    """Serializes request starts so the observed rate stays <= R/min + 1 burst."""

    def __init__(self, requests_per_minute: float):
        self._interval = 60.0 / requests_per_minute
        self._lock = threading.Lock()
        self._next_at = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if wait > 0:
            time.sleep(wait)


class ChatClient:
    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        policy: GenPolicy | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        base = base_url or os.environ.get("LLM_BASE_URL")
        if not base:
            raise ChatError("no base url: pass base_url or set LLM_BASE_URL")
        self.model = model or os.environ.get("LLM_MODEL", "gpt-3.5-turbo")
        self.policy = policy or GenPolicy()
        self._limiter = (
            RateLimiter(self.policy.requests_per_minute)
            if self.policy.requests_per_minute
            else None
        )
        self._sleep = sleep
        self.request_count = 0
        self._count_lock = threading.Lock()
        key = api_key or os.environ.get("LLM_API_KEY", "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(
            base_url=base.rstrip("/"), timeout=timeout,
            headers=headers, transport=transport,
        )

    def complete(self, messages: list[dict], temperature: float | None = None) -> str:
        """One chat completion; backoff-retries transport errors and 429s."""
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": self.policy.temperature if temperature is None else temperature,
            "max_tokens": self.policy.max_tokens,
        }
        last_error = "no attempt made"
        for delay in [0.0, *self.policy.backoff.delays()]:
            if delay:
                self._sleep(delay)
            if self._limiter:
                self._limiter.acquire()
            with self._count_lock:
                self.request_count += 1
            try:
                resp = self._client.post("/v1/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"server status {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise ChatError(f"chat endpoint returned {resp.status_code}: {resp.text[:200]}")
            body = resp.json()
            try:
                return body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ChatError(f"malformed chat response: {exc}") from exc
        raise ChatError(f"retries exhausted: {last_error}")

    def close(self) -> None:
        self._client.close()
