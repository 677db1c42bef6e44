"""Completion clients: a scripted offline mock and a live chat endpoint.

The deterministic template-oracle solver used by the synthetic experiments
lives in ``neuron.synthetic``; all three speak the same ``complete``
interface.
"""

from __future__ import annotations

import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

from .errors import (
    CompletionTimeout,
    ConfigError,
    MalformedResponse,
    RateLimited,
    ScriptExhausted,
    UpstreamError,
)

LLM_TOKEN_ENV = "NEURON_LLM_TOKEN"

CLIENT_KINDS = ("scripted", "template-oracle", "live-http")


@dataclass(frozen=True)
class CompletionRequest:
    system: str
    user: str
    temperature: float = 0.0
    max_output_tokens: int = 1024
    model: str = ""
    role: str = "solver"  # solver | refiner


class CompletionClient(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


@dataclass
class ScriptedClient:
    """Pops canned responses in order and records every request it saw.

    Running out of script is an error, never silence: a test that makes an
    unexpected extra call should fail loudly.
    """

    responses: Iterable[str] = ()
    requests: list[CompletionRequest] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._queue = deque(self.responses)
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.requests.append(request)
            if not self._queue:
                raise ScriptExhausted(f"script exhausted after {len(self.requests) - 1} responses")
            return self._queue.popleft()

    def remaining(self) -> int:
        with self._lock:
            return len(self._queue)


class HttpChatClient:
    """Chat-completion client over HTTP with bounded retries.

    Transient failures (HTTP 429, 5xx, timeouts) are retried up to four
    attempts with waits of 0.5 s, 1 s, 2 s between them; ``jitter`` widens
    each wait by up to the given fraction. In-flight requests are capped by
    a semaphore so one shared client cannot stampede an endpoint.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "",
        *,
        timeout: float = 30.0,
        max_attempts: int = 4,
        backoff_base: float = 0.5,
        jitter: float = 0.0,
        max_in_flight: int = 4,
        sleep: Callable[[float], None] = time.sleep,
        token_env: str = LLM_TOKEN_ENV,
        transport=None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.jitter = jitter
        self.token_env = token_env
        self._sleep = sleep
        self._semaphore = threading.Semaphore(max_in_flight)
        self._lock = threading.Lock()
        self._client = None
        self._transport = transport
        self.total_attempts = 0
        self.last_attempts = 0

    def _http(self):
        import httpx

        with self._lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.timeout, transport=self._transport)
            return self._client

    def _wait(self, attempt: int) -> None:
        delay = self.backoff_base * (2 ** (attempt - 1))
        if self.jitter:
            import random

            delay *= 1.0 + random.uniform(-self.jitter, self.jitter)
        self._sleep(delay)

    def complete(self, request: CompletionRequest) -> str:
        import httpx

        if not (request.model or self.model):
            raise ConfigError("live completion needs a model name")
        body = {
            "model": request.model or self.model,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        }
        headers = {}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"

        last_failure: Exception | None = None
        last_status: int | None = None
        with self._semaphore:
            self.last_attempts = 0
            for attempt in range(1, self.max_attempts + 1):
                if attempt > 1:
                    self._wait(attempt - 1)
                self.total_attempts += 1
                self.last_attempts = attempt
                try:
                    resp = self._http().post(self.endpoint, json=body, headers=headers)
                except httpx.TimeoutException as exc:
                    last_failure = exc
                    last_status = None
                    continue
                except httpx.HTTPError as exc:
                    last_failure = exc
                    last_status = None
                    continue
                if resp.status_code == 429 or 500 <= resp.status_code < 600:
                    last_status = resp.status_code
                    last_failure = None
                    continue
                if resp.status_code != 200:
                    raise MalformedResponse(f"endpoint returned {resp.status_code}")
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise MalformedResponse(f"unexpected response shape: {exc}") from exc

        if last_status == 429:
            raise RateLimited(f"still rate-limited after {self.max_attempts} attempts")
        if last_status is not None:
            raise UpstreamError(f"endpoint kept failing ({last_status}) after {self.max_attempts} attempts")
        raise CompletionTimeout(f"no response after {self.max_attempts} attempts: {last_failure}")
