"""Model backends: contracts, fixture-driven mocks and an HTTP adapter."""
from __future__ import annotations

import json
from pathlib import Path

from ..errors import ConfigError
from .base import (
    Backends,
    Detector,
    Generator,
    LikelihoodScorer,
    RelevanceScorer,
    Retriever,
    TeacherScorer,
    request_digest,
)
from .http import HttpBackend, http_backend
from .mock import CallRecord, MockBackend, mock_from_fixture

ROLES = ("retriever", "scorer", "segment_scorer", "detector", "likelihood", "teacher", "generator")

__all__ = [
    "Backends",
    "CallRecord",
    "Detector",
    "Generator",
    "HttpBackend",
    "LikelihoodScorer",
    "MockBackend",
    "RelevanceScorer",
    "Retriever",
    "TeacherScorer",
    "http_backend",
    "load_backend",
    "load_backends",
    "mock_from_fixture",
    "request_digest",
]


def _is_endpoints_file(path: Path) -> bool:
    if path.is_dir() or path.suffix != ".json":
        return False
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return False
    return isinstance(data, dict) and "endpoints" in data


def _http_from_entry(entry: dict) -> HttpBackend:
    if "url" not in entry:
        raise ConfigError(f"endpoint entry needs a 'url': {entry!r}")
    return HttpBackend(
        entry["url"],
        entry.get("auth_token_env"),
        float(entry.get("timeout", 30.0)),
        int(entry.get("retries", 3)),
        int(entry.get("max_connections", 8)),
    )


def load_role_map(source, corpus=()) -> dict:
    """Map every backend role to an instance.

    ``source`` is an ``http(s)://`` URL, a fixture file or directory, or an
    endpoints file of the form ``{"endpoints": {"default": {"url": ...},
    "<role>": {...}}}`` where per-role entries override the default.
    """
    source = str(source)
    if source.startswith(("http://", "https://")):
        backend = HttpBackend(source)
        return {role: backend for role in ROLES}
    path = Path(source)
    if _is_endpoints_file(path):
        endpoints = json.loads(path.read_text(encoding="utf-8"))["endpoints"]
        default = endpoints.get("default")
        shared = _http_from_entry(default) if default else None
        roles = {}
        for role in ROLES:
            if role in endpoints:
                roles[role] = _http_from_entry(endpoints[role])
            elif shared is not None:
                roles[role] = shared
        return roles
    backend = mock_from_fixture(path, corpus)
    return {role: backend for role in ROLES}


def load_backend(source, role: str = "scorer", corpus=()):
    roles = load_role_map(source, corpus)
    if role not in roles:
        raise ConfigError(f"no backend configured for role {role!r}")
    return roles[role]


def load_backends(source, corpus=()) -> Backends:
    roles = load_role_map(source, corpus)
    missing = [r for r in ("retriever", "scorer", "detector", "generator") if r not in roles]
    if missing:
        raise ConfigError(f"no backend configured for {', '.join(missing)}")
    return Backends(
        retriever=roles["retriever"],
        scorer=roles["scorer"],
        detector=roles["detector"],
        generator=roles["generator"],
        segment_scorer=roles.get("segment_scorer"),
    )
