"""Uniform chat-completion gateway with scripted-mock and cache backends.

Every pipeline stage funnels its model calls through :class:`Gateway`,
which owns the model id and retry policy.  Backends are swappable:

* :class:`HttpBackend` posts to an OpenAI-style chat completions endpoint.
* :class:`ScriptedMockBackend` answers from an ordered (pattern, responder)
  rule list, for offline runs and tests.
* :class:`RecordReplayBackend` wraps another backend with a JSONL cache so
  a recorded run can be replayed byte-for-byte with zero network activity.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from .errors import AlpgenError

logger = logging.getLogger(__name__)

DEFAULT_MAX_TOKENS = 1024
DEFAULT_PARALLELISM = 4
MAX_RETRIES = 3
BASE_DELAY = 0.5
BACKOFF_FACTOR = 2.0
API_KEY_ENV = "ALPGEN_API_KEY"


class GatewayError(AlpgenError):
    pass


class TransportError(GatewayError):
    """Retryable failure: connection trouble, timeout, 5xx, rate limit."""


class AuthenticationError(GatewayError):
    """Non-retryable credential failure (HTTP 401/403)."""


class MalformedResponseError(GatewayError):
    """The backend answered, but not in the shape we expect."""


class CacheMissError(GatewayError):
    """Replay-mode request whose digest is not in the store."""


@dataclass(frozen=True)
class ChatRequest:
    model: str
    user: str
    system: str | None = None
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if not self.user.strip():
            raise GatewayError("user prompt must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise GatewayError(f"temperature {self.temperature} outside [0, 1]")
        if self.max_tokens < 1:
            raise GatewayError("max_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    backend: str
    cached: bool = False


def cache_key(request: ChatRequest) -> str:
    """Stable digest over every request field that affects the completion."""
    payload = json.dumps(
        {
            "model": request.model,
            "system": request.system,
            "user": request.user,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    name: str

    def complete(self, request: ChatRequest) -> ChatResponse: ...


class HttpBackend:
    """OpenAI-style ``/chat/completions`` client."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = 60.0,
        api_key_env: str = API_KEY_ENV,
    ) -> None:
        self.endpoint = endpoint
        self.timeout = timeout
        self.api_key_env = api_key_env
        self.name = "http"

    def complete(self, request: ChatRequest) -> ChatResponse:
        import os

        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        payload = {
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            resp = requests.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"request to {self.endpoint} failed: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthenticationError(
                f"authentication rejected ({resp.status_code}); "
                f"check ${self.api_key_env}"
            )
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"server returned {resp.status_code}")
        if resp.status_code != 200:
            raise GatewayError(f"server returned {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(
                f"unexpected completion payload: {exc}"
            ) from exc
        if not isinstance(text, str):
            raise MalformedResponseError("completion content is not text")
        return ChatResponse(text=text, backend=self.name)


Responder = str | Callable[[ChatRequest, "re.Match[str]"], str]
Rule = tuple[str, Responder]


class ScriptedMockBackend:
    """Deterministic backend driven by ordered (pattern, responder) rules.

    Patterns are regexes searched against the user prompt; the first match
    wins.  The final rule must be a catch-all (its pattern must match any
    text) so a completion is always produced.  Every request is logged on
    ``self.requests`` for call-count assertions.
    """

    def __init__(self, rules: Sequence[Rule], name: str = "mock") -> None:
        if not rules:
            raise GatewayError("scripted mock needs at least one rule")
        self._rules = [(re.compile(pattern, re.DOTALL), resp) for pattern, resp in rules]
        if self._rules[-1][0].search("x") is None or self._rules[-1][0].search("") is None:
            raise GatewayError("last scripted rule must be a catch-all pattern")
        self.name = name
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.requests)

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
        for pattern, responder in self._rules:
            match = pattern.search(request.user)
            if match is None:
                continue
            text = responder(request, match) if callable(responder) else responder
            return ChatResponse(text=text, backend=self.name)
        raise GatewayError("no scripted rule matched (catch-all missing?)")


class CacheMode(str, Enum):
    RECORD = "record"
    REPLAY = "replay"
    PASSTHROUGH = "passthrough"


class RecordReplayBackend:
    """JSONL request cache around another backend.

    The store holds one ``{"digest": ..., "text": ...}`` object per line.
    Record mode serves cached digests and appends new ones; replay mode
    never touches the inner backend and raises :class:`CacheMissError` for
    unknown digests; passthrough disables the cache entirely.
    """

    def __init__(
        self,
        inner: Backend,
        store: str | Path,
        mode: CacheMode = CacheMode.RECORD,
    ) -> None:
        self.inner = inner
        self.store = Path(store)
        self.mode = mode
        self.name = f"{mode.value}({inner.name})"
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()
        if mode is CacheMode.REPLAY and not self.store.exists():
            raise GatewayError(f"replay store not found: {self.store}")
        if self.store.exists():
            self._load()

    def _load(self) -> None:
        with self.store.open("r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    self._cache[record["digest"]] = record["text"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise GatewayError(
                        f"{self.store} line {lineno}: bad cache record: {exc}"
                    ) from exc

    def _persist(self, digest: str, text: str) -> None:
        record = json.dumps({"digest": digest, "text": text}, ensure_ascii=False)
        self.store.parent.mkdir(parents=True, exist_ok=True)
        with self.store.open("a", encoding="utf-8") as fh:
            fh.write(record + "\n")

    def __len__(self) -> int:
        return len(self._cache)

    def complete(self, request: ChatRequest) -> ChatResponse:
        if self.mode is CacheMode.PASSTHROUGH:
            return self.inner.complete(request)
        digest = cache_key(request)
        with self._lock:
            cached = self._cache.get(digest)
        if cached is not None:
            return ChatResponse(text=cached, backend=self.name, cached=True)
        if self.mode is CacheMode.REPLAY:
            raise CacheMissError(f"no cached completion for digest {digest}")
        response = self.inner.complete(request)
        with self._lock:
            if digest not in self._cache:
                self._cache[digest] = response.text
                self._persist(digest, response.text)
        return ChatResponse(text=response.text, backend=self.name, cached=False)


class Gateway:
    """Backend plus model id, retry policy and fan-out bound."""

    def __init__(
        self,
        backend: Backend,
        model: str = "mock-model",
        max_retries: int = MAX_RETRIES,
        base_delay: float = BASE_DELAY,
        backoff_factor: float = BACKOFF_FACTOR,
        parallelism: int = DEFAULT_PARALLELISM,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_retries < 0:
            raise GatewayError("max_retries must be >= 0")
        if parallelism < 1:
            raise GatewayError("parallelism must be >= 1")
        self.backend = backend
        self.model = model
        self.max_retries = max_retries
        self.base_delay = base_delay
        self.backoff_factor = backoff_factor
        self.parallelism = parallelism
        self._sleep = sleep

    def request(
        self,
        user: str,
        system: str | None = None,
        temperature: float = 0.0,
        max_tokens: int = DEFAULT_MAX_TOKENS,
    ) -> ChatRequest:
        return ChatRequest(
            model=self.model,
            user=user,
            system=system,
            temperature=temperature,
            max_tokens=max_tokens,
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        """Issue one completion, retrying transport failures with backoff."""
        attempt = 0
        while True:
            try:
                return self.backend.complete(request)
            except TransportError as exc:
                if attempt >= self.max_retries:
                    raise
                delay = self.base_delay * (self.backoff_factor**attempt)
                logger.warning(
                    "transport failure (%s); retry %d/%d in %.1fs",
                    exc,
                    attempt + 1,
                    self.max_retries,
                    delay,
                )
                self._sleep(delay)
                attempt += 1
