"""Deterministic fixture-driven backends.

A fixture is a JSON object holding any of these tables::

    {"scores":         [{"query_id": "q1", "text": "...", "score": 0.9}],
     "retrievals":     [{"query_id": "q1", "doc_ids": ["d1", "d2"]}],
     "detections":     [{"query_id": "q1", "image_ref": "img.png",
                         "candidates": [{"box": [0, 0, 60, 60], "objectness": 0.5, "semantic": 0.4}]}],
     "logprobs":       [{"query_id": "q1", "fragment": null, "logprobs": [-1.2, -0.8]}],
     "teacher_logits": [{"query_id": "q1", "fragment": "d1#s2-2", "logit": 1.5}],
     "answers":        [{"query_id": "q1", "context": ["d1#s2-2"], "answer": "..."}],
     "responses":      {"<request digest>": {...raw response body...}}}

Fragments are referenced by :attr:`EvidenceItem.key`. Image documents are
scored through the ``scores`` table with their ``image_ref`` as the text.
``retrievals`` entries may list inline ``docs`` instead of ``doc_ids``.
Anything not covered by a table is looked up by request digest; a miss
raises :class:`FixtureMiss`.
"""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import DataError, FixtureMiss, FixtureParseError
from ..types import Document, EvidenceItem, Query
from . import base

_TABLES = ("scores", "retrievals", "detections", "logprobs", "teacher_logits", "answers")


@dataclass(frozen=True)
class CallRecord:
    endpoint: str
    body: dict


class MockBackend:
    """Answers every backend contract from fixture tables and logs each call."""

    def __init__(self, fixture: dict, corpus: dict[str, Document] | None = None, name: str = "fixture"):
        try:
            self._load(fixture, corpus or {})
        except (KeyError, TypeError, ValueError, DataError) as exc:
            raise FixtureParseError(f"{name}: malformed fixture ({exc!r})") from None
        digest = hashlib.sha256(json.dumps(fixture, sort_keys=True).encode("utf-8")).hexdigest()[:12]
        self.descriptor = f"mock:{name}:{digest}"
        self._lock = threading.Lock()
        self._calls: list[CallRecord] = []

    def _load(self, fixture: dict, corpus: dict[str, Document]) -> None:
        if not isinstance(fixture, dict):
            raise TypeError("fixture must be a JSON object")
        unknown = set(fixture) - set(_TABLES) - {"responses", "descriptor", "comment"}
        if unknown:
            raise ValueError(f"unknown fixture tables {sorted(unknown)}")
        self.scores = {(str(r["query_id"]), r["text"]): float(r["score"]) for r in fixture.get("scores", [])}
        self._corpus = corpus
        self.retrievals = {}
        for r in fixture.get("retrievals", []):
            if "docs" in r:
                docs = [Document.from_dict(d) for d in r["docs"]]
            else:
                docs = [str(i) for i in r["doc_ids"]]
            self.retrievals[str(r["query_id"])] = docs
        self.detections = {
            (str(r["query_id"]), r["image_ref"]): {"candidates": r["candidates"]} for r in fixture.get("detections", [])
        }
        self.logprob_table = {
            (str(r["query_id"]), r.get("fragment")): {"logprobs": r["logprobs"]} for r in fixture.get("logprobs", [])
        }
        self.teacher_table = {
            (str(r["query_id"]), r["fragment"]): float(r["logit"]) for r in fixture.get("teacher_logits", [])
        }
        self.answers = [
            (str(r["query_id"]), None if r.get("context") is None else tuple(r["context"]), r["answer"])
            for r in fixture.get("answers", [])
        ]
        self.responses = dict(fixture.get("responses", {}))

    # ------------------------------------------------------------ call log

    @property
    def calls(self) -> list[CallRecord]:
        with self._lock:
            return list(self._calls)

    def calls_to(self, endpoint: str) -> list[CallRecord]:
        return [c for c in self.calls if c.endpoint == endpoint]

    def reset_calls(self) -> None:
        with self._lock:
            self._calls.clear()

    def _record(self, endpoint: str, body: dict) -> None:
        with self._lock:
            self._calls.append(CallRecord(endpoint, body))

    def _by_digest(self, endpoint: str, body: dict, key):
        digest = base.request_digest(endpoint, body)
        if digest in self.responses:
            return self.responses[digest]
        raise FixtureMiss(key)

    # ----------------------------------------------------------- contracts

    def retrieve(self, query: Query, n_ret: int) -> list[Document]:
        body = base.retrieve_request(query, n_ret)
        self._record("retrieve", body)
        if query.id in self.retrievals:
            docs = []
            for entry in self.retrievals[query.id][:n_ret]:
                if isinstance(entry, str):
                    if entry not in self._corpus:
                        raise FixtureMiss(("corpus", entry))
                    entry = self._corpus[entry]
                docs.append(entry)
            return docs
        return base.parse_retrieve(self._by_digest("retrieve", body, ("retrieve", query.id)))[:n_ret]

    def score(self, query: Query, text: str) -> float:
        body = base.score_request(query, text)
        self._record("score", body)
        key = (query.id, text)
        if key in self.scores:
            return base.parse_score({"score": self.scores[key]})
        return base.parse_score(self._by_digest("score", body, key))

    def detect(self, query: Query, image_ref: str):
        body = base.detect_request(query, image_ref)
        self._record("detect", body)
        key = (query.id, image_ref)
        data = self.detections.get(key) or self._by_digest("detect", body, key)
        return base.parse_detect(data)

    def logprobs(self, query: Query, fragment: EvidenceItem | None, answer_tokens: Sequence[str]):
        body = base.logprobs_request(query, fragment, answer_tokens)
        self._record("logprobs", body)
        key = (query.id, None if fragment is None else fragment.key)
        data = self.logprob_table.get(key) or self._by_digest("logprobs", body, key)
        return base.parse_logprobs(data, answer_tokens)

    def logit(self, query: Query, fragment: EvidenceItem) -> float:
        body = base.teacher_request(query, fragment)
        self._record("teacher_logit", body)
        key = (query.id, fragment.key)
        if key in self.teacher_table:
            return base.parse_teacher({"logit": self.teacher_table[key]})
        return base.parse_teacher(self._by_digest("teacher_logit", body, key))

    def generate(self, query: Query, context: Sequence[EvidenceItem]) -> str:
        body = base.generate_request(query, context)
        self._record("generate", body)
        keys = tuple(item.key for item in context)
        for query_id, ctx, answer in self.answers:
            if query_id == query.id and (ctx is None or ctx == keys):
                return base.parse_generate({"answer": answer})
        return base.parse_generate(self._by_digest("generate", body, (query.id, keys)))


def _read_fixture(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise FixtureParseError(f"cannot read fixture {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise FixtureParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def merge_fixtures(fixtures: Sequence[dict]) -> dict:
    merged: dict = {}
    for fx in fixtures:
        if not isinstance(fx, dict):
            raise FixtureParseError("fixture must be a JSON object")
        for table, value in fx.items():
            if table in ("descriptor", "comment"):
                continue
            if table == "responses":
                merged.setdefault("responses", {}).update(value)
            else:
                merged.setdefault(table, []).extend(value)
    return merged


def mock_from_fixture(fixture_path, corpus: Sequence[Document] | None = None) -> MockBackend:
    """Build a :class:`MockBackend` from a fixture file or a directory of them.

    Directory contents (``*.json``) are merged in sorted filename order.
    """
    path = Path(fixture_path)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise FixtureParseError(f"no *.json fixtures in {path}")
        fixture = merge_fixtures([_read_fixture(f) for f in files])
    else:
        fixture = _read_fixture(path)
    by_id = {d.id: d for d in corpus or ()}
    return MockBackend(fixture, by_id, name=path.name)
