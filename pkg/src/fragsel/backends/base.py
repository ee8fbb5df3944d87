"""Backend contracts and the JSON wire schemas they share.

Every contract method corresponds to one endpoint. Request bodies are built
by the ``*_request`` helpers and responses are checked by the ``parse_*``
helpers, so mock and HTTP backends enforce identical output contracts.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

from ..errors import BackendFailure, DataError, DetectorFailure, ScorerFailure
from ..fig import TokenLogProbs
from ..types import Document, EvidenceItem, Query
from ..visual_segmentation import DetectionCandidate

WIRE_VERSION = 1


@runtime_checkable
class Retriever(Protocol):
    descriptor: str

    def retrieve(self, query: Query, n_ret: int) -> list[Document]: ...


@runtime_checkable
class RelevanceScorer(Protocol):
    descriptor: str

    def score(self, query: Query, text: str) -> float: ...


@runtime_checkable
class Detector(Protocol):
    descriptor: str

    def detect(self, query: Query, image_ref: str) -> list[DetectionCandidate]: ...


@runtime_checkable
class LikelihoodScorer(Protocol):
    descriptor: str

    def logprobs(self, query: Query, fragment: EvidenceItem | None, answer_tokens: Sequence[str]) -> TokenLogProbs: ...


@runtime_checkable
class TeacherScorer(Protocol):
    descriptor: str

    def logit(self, query: Query, fragment: EvidenceItem) -> float: ...


@runtime_checkable
class Generator(Protocol):
    descriptor: str

    def generate(self, query: Query, context: Sequence[EvidenceItem]) -> str: ...


@dataclass
class Backends:
    """The set of backends one pipeline run talks to.

    ``segment_scorer`` drives text bisection; it defaults to the coarse
    reranker's scorer when not given.
    """

    retriever: Retriever
    scorer: RelevanceScorer
    detector: Detector
    generator: Generator
    segment_scorer: RelevanceScorer | None = None

    def __post_init__(self):
        if self.segment_scorer is None:
            self.segment_scorer = self.scorer

    def descriptors(self) -> dict[str, str]:
        return {
            "retriever": self.retriever.descriptor,
            "scorer": self.scorer.descriptor,
            "segment_scorer": self.segment_scorer.descriptor,
            "detector": self.detector.descriptor,
            "generator": self.generator.descriptor,
        }


# ----------------------------------------------------------------- requests


def retrieve_request(query: Query, n_ret: int) -> dict:
    return {"v": WIRE_VERSION, "query": query.text, "n_ret": n_ret}


def score_request(query: Query, text: str) -> dict:
    return {"v": WIRE_VERSION, "query": query.text, "text": text}


def detect_request(query: Query, image_ref: str) -> dict:
    return {"v": WIRE_VERSION, "query": query.text, "image_ref": image_ref}


def logprobs_request(query: Query, fragment: EvidenceItem | None, answer_tokens: Sequence[str]) -> dict:
    return {
        "v": WIRE_VERSION,
        "query": query.text,
        "fragment": None if fragment is None else fragment.to_dict(),
        "answer_tokens": list(answer_tokens),
    }


def teacher_request(query: Query, fragment: EvidenceItem) -> dict:
    return {"v": WIRE_VERSION, "query": query.text, "fragment": fragment.to_dict()}


def generate_request(query: Query, context: Sequence[EvidenceItem]) -> dict:
    return {"v": WIRE_VERSION, "query": query.text, "context": [item.to_dict() for item in context]}


def request_digest(endpoint: str, body: dict) -> str:
    """Stable key for a request: sha256 over the endpoint and canonical JSON body."""
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(f"{endpoint}\n{canonical}".encode("utf-8")).hexdigest()


# ---------------------------------------------------------------- responses


def _field(data, name: str, error=BackendFailure):
    if not isinstance(data, dict) or name not in data:
        raise error(f"response lacks field {name!r}: {str(data)[:200]}")
    return data[name]


def _finite(value, what: str, error=BackendFailure) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise error(f"{what} is not a number: {value!r}") from None
    if not math.isfinite(value):
        raise error(f"{what} is not finite: {value!r}")
    return value


def parse_retrieve(data) -> list[Document]:
    docs = _field(data, "docs")
    try:
        return [Document.from_dict(d) for d in docs]
    except (DataError, TypeError, AttributeError) as exc:
        raise BackendFailure(f"bad document in retrieval response: {exc}") from None


def parse_score(data) -> float:
    return _finite(_field(data, "score", ScorerFailure), "score", ScorerFailure)


def parse_detect(data) -> list[DetectionCandidate]:
    out = []
    for raw in _field(data, "candidates", DetectorFailure):
        try:
            c = DetectionCandidate.from_dict(raw)
        except (DataError, KeyError, TypeError, ValueError) as exc:
            raise DetectorFailure(f"bad detection candidate {raw!r}: {exc}") from None
        if not (0.0 <= c.objectness <= 1.0 and 0.0 <= c.semantic_score <= 1.0):
            raise DetectorFailure(f"detector scores outside [0, 1]: {raw!r}")
        out.append(c)
    return out


def parse_logprobs(data, answer_tokens: Sequence[str]) -> TokenLogProbs:
    values = _field(data, "logprobs")
    if not isinstance(values, list):
        raise BackendFailure(f"logprobs must be a list, got {values!r}")
    values = [_finite(v, "logprob") for v in values]
    if len(values) != len(answer_tokens):
        raise BackendFailure(f"expected {len(answer_tokens)} logprobs, got {len(values)}")
    if any(v > 0 for v in values):
        raise BackendFailure(f"positive log-probability in {values}")
    return TokenLogProbs(tuple(answer_tokens), tuple(values))


def parse_teacher(data) -> float:
    return _finite(_field(data, "logit"), "teacher logit")


def parse_generate(data) -> str:
    answer = _field(data, "answer")
    if not isinstance(answer, str):
        raise BackendFailure(f"answer must be a string, got {answer!r}")
    return answer
