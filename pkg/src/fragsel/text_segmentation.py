"""Sentence splitting and score-driven recursive bisection of text documents."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import EmptyDocument, NotAnImage, ScorerFailure, SingleSentence
from .types import Document, Query, TextFragment

Span = tuple[int, int]

ABBREVIATIONS = frozenset({"dr.", "mr.", "mrs.", "ms.", "prof.", "e.g.", "i.e.", "etc."})
_TERMINALS = (".", "!", "?")


def split_sentences(body: str) -> list[str]:
    """Split on ``.``, ``!`` or ``?`` followed by whitespace.

    A token from the abbreviation list never ends a sentence. The returned
    sentences are whitespace-normalized, so joining them with single spaces
    reproduces the normalized body.
    """
    tokens = body.split()
    if not tokens:
        raise EmptyDocument("document body is empty or whitespace-only")
    sentences, current = [], []
    for token in tokens:
        current.append(token)
        if token.endswith(_TERMINALS) and token.lower() not in ABBREVIATIONS:
            sentences.append(" ".join(current))
            current = []
    if current:
        sentences.append(" ".join(current))
    return sentences


def span_text(sentences: Sequence[str], span: Span) -> str:
    return " ".join(sentences[span[0] : span[1] + 1])


def split_doc(sentences: Sequence[str], span: Span) -> tuple[Span, Span]:
    """Bisect ``span`` at a sentence boundary near its midpoint.

    Only boundaries leaving at most ``ceil(m / 2)`` of the ``m`` sentences on
    either side are eligible, which bounds recursion depth by
    ``ceil(log2(m))``. Among those (two when ``m`` is odd) the one minimizing
    the character-count difference between halves wins; ties go to the
    smaller left half.
    """
    start, end = span
    if end <= start:
        raise SingleSentence(f"span {span} holds a single sentence")
    lengths = [len(s) for s in sentences[start : end + 1]]
    m, total = len(lengths), sum(lengths)
    half = (m + 1) // 2
    best_mid, best_gap = start, math.inf
    for n_left in range(m - half, half + 1):
        left = sum(lengths[:n_left])
        gap = abs(left - (total - left))
        if gap < best_gap:
            best_mid, best_gap = start + n_left - 1, gap
    return (start, best_mid), (best_mid + 1, end)


@dataclass
class SegmentScoreTrace:
    """Path taken by :func:`recur_split`.

    ``visited`` holds the (span, score) of every node on the descent path;
    ``evaluations`` additionally keeps the sibling that was not followed.
    """

    visited: list[tuple[Span, float]] = field(default_factory=list)
    evaluations: list[tuple[Span, float]] = field(default_factory=list)

    @property
    def result_span(self) -> Span:
        return self.visited[-1][0]

    @property
    def depth(self) -> int:
        """Number of bisections that were followed."""
        return len(self.visited) - 1

    def to_dict(self) -> dict:
        return {
            "visited": [{"span": list(s), "score": v} for s, v in self.visited],
            "evaluations": [{"span": list(s), "score": v} for s, v in self.evaluations],
            "result_span": list(self.result_span),
        }


def _checked_score(scorer, query: Query, text: str) -> float:
    value = float(scorer.score(query, text))
    if not math.isfinite(value):
        raise ScorerFailure(f"scorer returned non-finite score {value!r}")
    return value


def recur_split(
    query: Query,
    doc: Document,
    scorer,
    splitter: Callable[[str], list[str]] = split_sentences,
    sentences: Sequence[str] | None = None,
) -> tuple[TextFragment, SegmentScoreTrace]:
    """Descend into the better-scoring half while it beats its parent.

    At each node both halves are scored; the walk continues into the left half
    only when it scores strictly higher than the right one, otherwise into the
    right, and only if that child strictly beats the parent. A child's score is
    reused as the parent score of the next step, so a document costs at most
    ``1 + 2 * depth`` scorer calls.

    ``sentences`` may be given to bypass ``splitter`` for pre-split corpora.
    """
    if doc.is_image:
        raise NotAnImage(f"document {doc.id!r} is an image, expected text")
    if sentences is None:
        sentences = splitter(doc.body)
    if not sentences:
        raise EmptyDocument(f"document {doc.id!r} has no sentences")

    span: Span = (0, len(sentences) - 1)
    parent = _checked_score(scorer, query, span_text(sentences, span))
    trace = SegmentScoreTrace(visited=[(span, parent)], evaluations=[(span, parent)])
    while span[1] > span[0]:
        left, right = split_doc(sentences, span)
        s_left = _checked_score(scorer, query, span_text(sentences, left))
        s_right = _checked_score(scorer, query, span_text(sentences, right))
        trace.evaluations += [(left, s_left), (right, s_right)]
        if max(s_left, s_right) <= parent:
            break
        span, parent = (left, s_left) if s_left > s_right else (right, s_right)
        trace.visited.append((span, parent))

    fragment = TextFragment(doc.id, span, span_text(sentences, span), parent)
    return fragment, trace


def trace_fragments(doc: Document, trace: SegmentScoreTrace, sentences: Sequence[str]) -> list[TextFragment]:
    """One fragment per node on the descent path, root first."""
    return [TextFragment(doc.id, span, span_text(sentences, span), score) for span, score in trace.visited]
