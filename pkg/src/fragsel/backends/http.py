"""JSON-over-HTTP adapter for remotely served models."""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from typing import Callable, Sequence
from urllib.parse import urlparse

import httpx

from ..errors import BackendFailure, BackendTimeout, ConfigError
from ..types import Document, EvidenceItem, Query
from . import base

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
BACKOFF_BASE = 0.5


class HttpBackend:
    """Implements every backend contract as a POST to ``<endpoint_url>/<route>``.

    Server errors (5xx, 429), timeouts and connection failures are retried
    with exponential backoff (0.5 s before the first retry, doubling after
    that), for at most ``retries`` attempts in total. Other non-2xx
    statuses fail immediately.
    """

    def __init__(
        self,
        endpoint_url: str,
        auth_token_env_var: str | None = None,
        timeout: float = 30.0,
        retries: int = MAX_ATTEMPTS,
        max_connections: int = 8,
        sleep: Callable[[float], None] = time.sleep,
        transport: httpx.BaseTransport | None = None,
    ):
        parsed = urlparse(endpoint_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ConfigError(f"malformed endpoint URL {endpoint_url!r}")
        if retries < 1:
            raise ConfigError("retries must be >= 1")
        self.endpoint_url = endpoint_url.rstrip("/")
        self.auth_token_env_var = auth_token_env_var
        self.timeout = timeout
        self.retries = retries
        self.descriptor = f"http:{self.endpoint_url}"
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_connections)
        self._client = httpx.Client(
            timeout=timeout,
            limits=httpx.Limits(max_connections=max_connections),
            transport=transport,
        )
        self._log_lock = threading.Lock()
        self.attempt_log: list[tuple[str, int, int | None]] = []

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.auth_token_env_var:
            token = os.environ.get(self.auth_token_env_var)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _log_attempt(self, route: str, attempt: int, status: int | None) -> None:
        with self._log_lock:
            self.attempt_log.append((route, attempt, status))

    def _post(self, route: str, body: dict):
        # serialized once so every retry sends identical bytes
        payload = json.dumps(body, sort_keys=True).encode("utf-8")
        url = f"{self.endpoint_url}/{route}"
        failure: BackendFailure | None = None
        for attempt in range(self.retries):
            if attempt:
                self._sleep(BACKOFF_BASE * 2 ** (attempt - 1))
            try:
                with self._slots:
                    response = self._client.post(url, content=payload, headers=self._headers())
            except httpx.TimeoutException as exc:
                self._log_attempt(route, attempt + 1, None)
                failure = BackendTimeout(f"POST {url} timed out after {self.timeout}s ({exc.__class__.__name__})")
                continue
            except httpx.TransportError as exc:
                self._log_attempt(route, attempt + 1, None)
                failure = BackendFailure(f"POST {url} failed: {exc}")
                continue
            self._log_attempt(route, attempt + 1, response.status_code)
            status = response.status_code
            if 200 <= status < 300:
                try:
                    return response.json()
                except ValueError as exc:
                    raise BackendFailure(
                        f"POST {url}: malformed response JSON ({exc})", status=status, body=response.text[:200]
                    ) from None
            failure = BackendFailure(
                f"POST {url} returned HTTP {status}", status=status, body=response.text[:200]
            )
            if status < 500 and status != 429:
                break
            logger.warning("POST %s returned %s (attempt %d/%d)", url, status, attempt + 1, self.retries)
        raise failure

    # ----------------------------------------------------------- contracts

    def retrieve(self, query: Query, n_ret: int) -> list[Document]:
        docs = base.parse_retrieve(self._post("retrieve", base.retrieve_request(query, n_ret)))
        return docs[:n_ret]

    def score(self, query: Query, text: str) -> float:
        return base.parse_score(self._post("score", base.score_request(query, text)))

    def detect(self, query: Query, image_ref: str):
        return base.parse_detect(self._post("detect", base.detect_request(query, image_ref)))

    def logprobs(self, query: Query, fragment: EvidenceItem | None, answer_tokens: Sequence[str]):
        data = self._post("logprobs", base.logprobs_request(query, fragment, answer_tokens))
        return base.parse_logprobs(data, answer_tokens)

    def logit(self, query: Query, fragment: EvidenceItem) -> float:
        return base.parse_teacher(self._post("teacher_logit", base.teacher_request(query, fragment)))

    def generate(self, query: Query, context: Sequence[EvidenceItem]) -> str:
        return base.parse_generate(self._post("generate", base.generate_request(query, context)))


def http_backend(
    endpoint_url: str, auth_token_env_var: str | None = None, timeout: float = 30.0, retries: int = MAX_ATTEMPTS
) -> HttpBackend:
    return HttpBackend(endpoint_url, auth_token_env_var, timeout, retries)
