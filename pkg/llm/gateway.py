# llm/gateway.py
"""
Thin wrapper around an OpenAI-compatible endpoint.

* bounded retries with exponential backoff + jitter on transient failures
  (timeouts, 429, 5xx, dropped connections); auth and other 4xx fail fast
* a process-wide concurrency limit on in-flight requests
* optional sqlite cache of temperature-0 chat responses
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Protocol, Tuple

import httpx
import openai
from openai import OpenAI
from pydantic import BaseModel, Field, SecretStr

from core.errors import DimensionMismatch, EmptyBatch, GatewayError
from db.cache import ResponseCache
from llm.embeddings import EmbeddingVector

log = logging.getLogger("gateway")

DEFAULT_BASE_URL = "https://api.openai.com/v1"


class GatewayConfig(BaseModel):
    base_url: str = DEFAULT_BASE_URL
    api_key: Optional[SecretStr] = None
    api_key_env: str = "GRIDQA_API_KEY"
    model_name: str = "gpt-4o-mini"
    embedding_model_name: str = "text-embedding-3-small"
    temperature: float = Field(0.0, ge=0.0, le=2.0)
    timeout: float = Field(30.0, gt=0)
    max_retries: int = Field(3, ge=0)
    concurrency_limit: int = Field(4, ge=1)
    backoff_base: float = Field(0.5, ge=0)
    cache: bool = True

    def resolved_api_key(self) -> str:
        if self.api_key is not None:
            return self.api_key.get_secret_value()
        return os.getenv(self.api_key_env, "")


@dataclass(frozen=True)
class ChatExchange:
    system: str
    user: str
    response: str
    usage: Optional[Dict[str, Any]]
    latency: float
    attempts: int
    request_hash: str
    cached: bool = False


class ChatHandle(Protocol):
    """What the pipeline needs from a model: live gateway or replay mock."""

    model_name: str

    def chat_complete(self, system: str, user: str,
                      temperature: Optional[float] = None) -> ChatExchange: ...

    def embed(self, texts: List[str]) -> List[EmbeddingVector]: ...


def request_hash(model: str, system: str, user: str, temperature: float) -> str:
    payload = json.dumps(
        {"model": model, "system": system, "user": user, "temperature": float(temperature)},
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _classify(exc: Exception) -> Tuple[str, bool]:
    """(kind, transient) for an SDK exception."""
    if isinstance(exc, openai.APITimeoutError):
        return "timeout", True
    if isinstance(exc, openai.APIConnectionError):
        return "connection", True
    if isinstance(exc, openai.RateLimitError):
        return "rate_limited", True
    if isinstance(exc, (openai.AuthenticationError, openai.PermissionDeniedError)):
        return "auth", False
    if isinstance(exc, openai.APIStatusError):
        if exc.status_code >= 500:
            return "server", True
        if exc.status_code == 408:
            return "timeout", True
        return "protocol", False
    return "protocol", False


class Gateway:
    def __init__(
        self,
        cfg: GatewayConfig,
        *,
        http_client: Optional[httpx.Client] = None,
        cache: Optional[ResponseCache] = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter: Optional[random.Random] = None,
    ):
        self.cfg = cfg
        self.model_name = cfg.model_name
        self.cache = cache if cfg.cache else None
        self._sleep = sleep
        self._jitter = jitter or random.Random()
        self._slots = threading.BoundedSemaphore(cfg.concurrency_limit)
        # retries are ours, so the SDK's own retry loop is off
        self._client = OpenAI(
            api_key=cfg.resolved_api_key() or "unset",
            base_url=cfg.base_url,
            timeout=cfg.timeout,
            max_retries=0,
            http_client=http_client,
        )

    # ── retry core ──────────────────────────────────────────────────────
    def backoff_delay(self, retry: int) -> float:
        """Delay before retry number `retry` (0-based): base·2^n·(1+jitter), jitter in [0, 0.5)."""
        return self.cfg.backoff_base * (2 ** retry) * (1.0 + 0.5 * self._jitter.random())

    def _with_retries(self, what: str, call: Callable[[], Any]) -> Tuple[Any, int]:
        attempts = 0
        while True:
            attempts += 1
            try:
                with self._slots:
                    return call(), attempts
            except openai.OpenAIError as exc:
                kind, transient = _classify(exc)
                if not transient or attempts > self.cfg.max_retries:
                    raise GatewayError(kind, str(exc), attempts) from exc
                delay = self.backoff_delay(attempts - 1)
                log.warning("%s %s (attempt %d) – retrying in %.2fs", what, kind, attempts, delay)
                self._sleep(delay)

    # ── chat ────────────────────────────────────────────────────────────
    def chat_complete(self, system: str, user: str,
                      temperature: Optional[float] = None) -> ChatExchange:
        temp = self.cfg.temperature if temperature is None else temperature
        key = request_hash(self.model_name, system, user, temp)
        cacheable = self.cache is not None and temp == 0

        if cacheable:
            hit = self.cache.get(key)
            if hit is not None:
                text, usage = hit
                return ChatExchange(system, user, text, usage, 0.0, 0, key, cached=True)

        started = time.perf_counter()
        resp, attempts = self._with_retries(
            "chat",
            lambda: self._client.chat.completions.create(
                model=self.model_name,
                messages=[
                    {"role": "system", "content": system},
                    {"role": "user", "content": user},
                ],
                temperature=temp,
            ),
        )
        latency = time.perf_counter() - started

        try:
            text = resp.choices[0].message.content or ""
        except (AttributeError, IndexError, TypeError) as exc:
            raise GatewayError("protocol", "chat response has no choices", attempts) from exc
        usage = resp.usage.model_dump() if getattr(resp, "usage", None) else None

        if cacheable:
            self.cache.put(key, self.model_name, text, usage)
        return ChatExchange(system, user, text, usage, latency, attempts, key)

    # ── embeddings ──────────────────────────────────────────────────────
    def embed(self, texts: List[str]) -> List[EmbeddingVector]:
        if not texts:
            raise EmptyBatch("no texts to embed")
        resp, _attempts = self._with_retries(
            "embed",
            lambda: self._client.embeddings.create(
                model=self.cfg.embedding_model_name,
                input=list(texts),
                encoding_format="float",
            ),
        )
        data = sorted(resp.data, key=lambda d: d.index)
        if len(data) != len(texts):
            raise GatewayError("protocol", f"{len(data)} embeddings for {len(texts)} texts")
        vectors = [EmbeddingVector(tuple(float(x) for x in d.embedding)) for d in data]
        if len({v.dimension for v in vectors}) > 1:
            raise DimensionMismatch("embedding dimensions differ within one batch")
        return vectors

    def close(self) -> None:
        self._client.close()
