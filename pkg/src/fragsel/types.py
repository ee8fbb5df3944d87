"""Domain value objects shared by every stage of the pipeline.

All types are frozen dataclasses. Each one knows how to turn itself into a
plain JSON-compatible dict and back; floats survive the trip unchanged because
``json`` writes them with ``repr`` precision.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Union

from .errors import DataError


def count_tokens(text: str) -> int:
    """Number of maximal non-whitespace runs in ``text``."""
    return len(text.split())


class Modality(str, enum.Enum):
    TEXT = "text"
    IMAGE = "image"

    @classmethod
    def parse(cls, value: str) -> "Modality":
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DataError(f"unknown modality {value!r}") from None


class EvidenceKind(str, enum.Enum):
    COARSE_DOC = "CoarseDoc"
    TEXT_FRAG = "TextFrag"
    VISUAL_FRAG = "VisualFrag"
    ORIGINAL_IMAGE = "OriginalImage"


@dataclass(frozen=True)
class Query:
    id: str
    text: str
    image_ref: str | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise DataError(f"query {self.id!r} has empty text")

    def to_dict(self) -> dict[str, Any]:
        d = {"id": self.id, "text": self.text}
        if self.image_ref is not None:
            d["image_ref"] = self.image_ref
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Query":
        return cls(id=str(d["id"]), text=d["text"], image_ref=d.get("image_ref"))


@dataclass(frozen=True)
class Document:
    id: str
    modality: Modality
    body: str | None = None
    image_ref: str | None = None
    token_count: int = field(init=False, compare=False)

    def __post_init__(self):
        modality = Modality.parse(self.modality) if not isinstance(self.modality, Modality) else self.modality
        object.__setattr__(self, "modality", modality)
        if modality is Modality.TEXT:
            if self.body is None or self.image_ref is not None:
                raise DataError(f"text document {self.id!r} needs a body and no image_ref")
        else:
            if self.image_ref is None or self.body is not None:
                raise DataError(f"image document {self.id!r} needs an image_ref and no body")
        object.__setattr__(self, "token_count", count_tokens(self.body) if self.body is not None else 0)

    @property
    def is_image(self) -> bool:
        return self.modality is Modality.IMAGE

    @classmethod
    def text(cls, id: str, body: str) -> "Document":
        return cls(id, Modality.TEXT, body=body)

    @classmethod
    def image(cls, id: str, image_ref: str) -> "Document":
        return cls(id, Modality.IMAGE, image_ref=image_ref)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "modality": self.modality.value}
        if self.body is not None:
            d["body"] = self.body
        else:
            d["image_ref"] = self.image_ref
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Document":
        try:
            return cls(str(d["id"]), Modality.parse(d["modality"]), body=d.get("body"), image_ref=d.get("image_ref"))
        except KeyError as exc:
            raise DataError(f"document record is missing {exc.args[0]!r}") from None


@dataclass(frozen=True)
class TextFragment:
    parent_doc_id: str
    sentence_span: tuple[int, int]
    text: str
    relevance_score: float

    def __post_init__(self):
        start, end = self.sentence_span
        object.__setattr__(self, "sentence_span", (int(start), int(end)))
        if not 0 <= start <= end:
            raise DataError(f"invalid sentence span {self.sentence_span}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "parent_doc_id": self.parent_doc_id,
            "sentence_span": list(self.sentence_span),
            "text": self.text,
            "relevance_score": self.relevance_score,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TextFragment":
        return cls(d["parent_doc_id"], tuple(d["sentence_span"]), d["text"], float(d["relevance_score"]))


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise DataError(f"non-finite box coordinates {coords}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise DataError(f"degenerate box {coords}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def to_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_list(cls, coords) -> "BoundingBox":
        if len(coords) != 4:
            raise DataError(f"box needs 4 coordinates, got {coords!r}")
        return cls(*(float(c) for c in coords))


@dataclass(frozen=True)
class VisualFragment:
    parent_doc_id: str
    box: BoundingBox
    objectness: float
    semantic_score: float
    image_ref: str | None = None

    def __post_init__(self):
        for name in ("objectness", "semantic_score"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DataError(f"{name} {value} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        d = {
            "parent_doc_id": self.parent_doc_id,
            "box": self.box.to_list(),
            "objectness": self.objectness,
            "semantic_score": self.semantic_score,
        }
        if self.image_ref is not None:
            d["image_ref"] = self.image_ref
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "VisualFragment":
        return cls(
            d["parent_doc_id"],
            BoundingBox.from_list(d["box"]),
            float(d["objectness"]),
            float(d["semantic_score"]),
            d.get("image_ref"),
        )


Payload = Union[Document, TextFragment, VisualFragment]

_PAYLOAD_TYPES = {
    EvidenceKind.COARSE_DOC: Document,
    EvidenceKind.ORIGINAL_IMAGE: Document,
    EvidenceKind.TEXT_FRAG: TextFragment,
    EvidenceKind.VISUAL_FRAG: VisualFragment,
}


@dataclass(frozen=True)
class EvidenceItem:
    """One unit of evidence in the candidate pool."""

    kind: EvidenceKind
    payload: Payload
    selector_score: float | None = None

    def __post_init__(self):
        kind = EvidenceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not isinstance(self.payload, _PAYLOAD_TYPES[kind]):
            raise DataError(f"{kind.value} item cannot carry a {type(self.payload).__name__}")
        if kind is EvidenceKind.ORIGINAL_IMAGE and not self.payload.is_image:
            raise DataError("OriginalImage item must wrap an image document")

    @classmethod
    def coarse(cls, doc: Document) -> "EvidenceItem":
        return cls(EvidenceKind.COARSE_DOC, doc)

    @classmethod
    def original_image(cls, doc: Document) -> "EvidenceItem":
        return cls(EvidenceKind.ORIGINAL_IMAGE, doc)

    @classmethod
    def text_fragment(cls, frag: TextFragment) -> "EvidenceItem":
        return cls(EvidenceKind.TEXT_FRAG, frag)

    @classmethod
    def visual_fragment(cls, frag: VisualFragment) -> "EvidenceItem":
        return cls(EvidenceKind.VISUAL_FRAG, frag)

    @property
    def doc_id(self) -> str:
        """Id of the corpus document this item came from."""
        if isinstance(self.payload, Document):
            return self.payload.id
        return self.payload.parent_doc_id

    @property
    def key(self) -> str:
        """Stable identifier, unique within a pool."""
        p = self.payload
        if self.kind is EvidenceKind.COARSE_DOC:
            return p.id
        if self.kind is EvidenceKind.ORIGINAL_IMAGE:
            return f"{p.id}#image"
        if self.kind is EvidenceKind.TEXT_FRAG:
            return f"{p.parent_doc_id}#s{p.sentence_span[0]}-{p.sentence_span[1]}"
        return f"{p.parent_doc_id}#roi({','.join(repr(c) for c in p.box.to_list())})"

    @property
    def is_visual(self) -> bool:
        if self.kind in (EvidenceKind.VISUAL_FRAG, EvidenceKind.ORIGINAL_IMAGE):
            return True
        return self.kind is EvidenceKind.COARSE_DOC and self.payload.is_image

    @property
    def text(self) -> str | None:
        """Text payload, or None for visual items."""
        if self.kind is EvidenceKind.TEXT_FRAG:
            return self.payload.text
        if self.kind is EvidenceKind.COARSE_DOC and not self.payload.is_image:
            return self.payload.body
        return None

    def with_score(self, score: float) -> "EvidenceItem":
        return replace(self, selector_score=score)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "payload": self.payload.to_dict(), "selector_score": self.selector_score}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvidenceItem":
        try:
            kind = EvidenceKind(d["kind"])
        except (KeyError, ValueError):
            raise DataError(f"bad evidence kind in {d!r}") from None
        payload = _PAYLOAD_TYPES[kind].from_dict(d["payload"])
        score = d.get("selector_score")
        return cls(kind, payload, None if score is None else float(score))


def context_tokens(items, image_token_cost: int) -> int:
    """Token cost of a context: text tokens plus a fixed cost per visual item."""
    total = 0
    for item in items:
        text = item.text
        total += image_token_cost if text is None else count_tokens(text)
    return total
