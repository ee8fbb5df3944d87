"""Filtering of grounding-detector output into visual fragments."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DataError, DetectorFailure, NotAnImage
from .types import BoundingBox, Document, Query, VisualFragment


@dataclass(frozen=True)
class DetectionCandidate:
    box: BoundingBox
    objectness: float
    semantic_score: float

    def __post_init__(self):
        if not (math.isfinite(self.objectness) and math.isfinite(self.semantic_score)):
            raise DataError("detection scores must be finite")

    def to_dict(self) -> dict:
        return {"box": self.box.to_list(), "objectness": self.objectness, "semantic": self.semantic_score}

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionCandidate":
        return cls(BoundingBox.from_list(d["box"]), float(d["objectness"]), float(d["semantic"]))


@dataclass(frozen=True)
class VisualFilterThresholds:
    tau_obj: float = 0.40
    tau_sem: float = 0.35
    tau_size: float = 2500.0

    def __post_init__(self):
        if not self.tau_size > 0:
            raise DataError(f"tau_size must be positive, got {self.tau_size}")

    @classmethod
    def from_config(cls, config) -> "VisualFilterThresholds":
        return cls(config.tau_obj, config.tau_sem, config.tau_size)


def box_area(box: BoundingBox) -> float:
    return (box.x_max - box.x_min) * (box.y_max - box.y_min)


def failed_constraints(candidate: DetectionCandidate, thresholds: VisualFilterThresholds) -> list[str]:
    """Names of the constraints ``candidate`` violates; empty if it is kept."""
    failed = []
    if not candidate.objectness > thresholds.tau_obj:
        failed.append("objectness")
    if not candidate.semantic_score > thresholds.tau_sem:
        failed.append("semantic")
    if not box_area(candidate.box) > thresholds.tau_size:
        failed.append("size")
    return failed


def filter_boxes(candidates, thresholds: VisualFilterThresholds) -> list[DetectionCandidate]:
    """Keep candidates strictly above every threshold, in input order.

    Boxes sitting exactly on a threshold are dropped. No suppression of
    overlapping boxes is done.
    """
    return [c for c in candidates if not failed_constraints(c, thresholds)]


def _validate(candidates, doc_id: str) -> list[DetectionCandidate]:
    for c in candidates:
        if not (0.0 <= c.objectness <= 1.0 and 0.0 <= c.semantic_score <= 1.0):
            raise DetectorFailure(
                f"detector returned out-of-range scores ({c.objectness}, {c.semantic_score}) for {doc_id!r}"
            )
    return list(candidates)


def extract_visual_fragments(
    query: Query, image_doc: Document, detector, thresholds: VisualFilterThresholds
) -> list[VisualFragment]:
    if not image_doc.is_image:
        raise NotAnImage(f"document {image_doc.id!r} is not an image")
    candidates = _validate(detector.detect(query, image_doc.image_ref), image_doc.id)
    return [
        VisualFragment(image_doc.id, c.box, c.objectness, c.semantic_score, image_doc.image_ref)
        for c in filter_boxes(candidates, thresholds)
    ]
