"""Hand-crafted (query, fragment) features for the linear selector."""
from __future__ import annotations

import math
import re

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .types import EvidenceItem, EvidenceKind, Query, count_tokens

FEATURE_SPEC = "baseline-v1"
FEATURE_NAMES = (
    "unigram_overlap",
    "bigram_overlap",
    "tokens_per_100",
    "relevance_score",
    "is_visual",
    "objectness",
    "semantic_score",
    "log_area_over_20",
)

_WORD = re.compile(r"\w+")


def _words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def _overlap(query_grams: set, frag_grams: set) -> float:
    if not query_grams:
        return 0.0
    return len(query_grams & frag_grams) / len(query_grams)


def extract_features(query: Query, fragment: EvidenceItem) -> list[float]:
    """Eight features; overlap ratios are measured against the query's vocabulary."""
    text = fragment.text
    if text is not None:
        q, f = _words(query.text), _words(text)
        unigram = _overlap(set(q), set(f))
        bigram = _overlap(set(zip(q, q[1:])), set(zip(f, f[1:])))
        tokens = count_tokens(text) / 100.0
    else:
        unigram = bigram = tokens = 0.0

    relevance = fragment.payload.relevance_score if fragment.kind is EvidenceKind.TEXT_FRAG else 0.0
    if fragment.kind is EvidenceKind.VISUAL_FRAG:
        p = fragment.payload
        obj, sem, area = p.objectness, p.semantic_score, math.log1p(p.box.area) / 20.0
    else:
        obj = sem = area = 0.0
    return [unigram, bigram, tokens, relevance, 1.0 if fragment.is_visual else 0.0, obj, sem, area]


class FragmentFeatureExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer from ``(Query, EvidenceItem)`` pairs to a feature matrix."""

    feature_spec = FEATURE_SPEC

    def fit(self, X, y=None):
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    def transform(self, X) -> np.ndarray:
        rows = [extract_features(query, item) for query, item in X]
        return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(FEATURE_NAMES))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)
