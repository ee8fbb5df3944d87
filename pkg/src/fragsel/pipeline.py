"""Retrieve, rerank, segment and select, then generate from the purified context."""
from __future__ import annotations

import math
import time
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .config import Config
from .errors import EmptyRetrieval, FragselError, PreconditionViolation, ScorerFailure
from .features import FragmentFeatureExtractor
from .text_segmentation import recur_split, split_sentences, trace_fragments
from .types import Document, EvidenceItem, Query, TextFragment, VisualFragment, context_tokens
from .visual_segmentation import VisualFilterThresholds, extract_visual_fragments

PHASES = ("Retrieval", "Rerank", "SegmentSelect", "Generate")

TextSegmenter = Callable[[Query, Document], Sequence[TextFragment]]
VisualSegmenter = Callable[[Query, Document], Sequence[VisualFragment]]


def _map(fn, items, parallelism: int) -> list:
    if parallelism > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _doc_text(doc: Document) -> str:
    return doc.image_ref if doc.is_image else doc.body


def rerank(query: Query, candidates: Sequence[Document], scorer, parallelism: int = 1) -> list[Document]:
    """Order candidates by descending scorer score; ties keep retrieval order.

    Image documents are scored with their ``image_ref`` in place of text.
    """
    scores = _map(lambda d: float(scorer.score(query, _doc_text(d))), list(candidates), parallelism)
    for doc, s in zip(candidates, scores):
        if not math.isfinite(s):
            raise ScorerFailure(f"non-finite rerank score {s!r} for document {doc.id!r}")
    order = sorted(range(len(candidates)), key=lambda i: -scores[i])
    return [candidates[i] for i in order]


def make_text_segmenter(scorer, collect_trace_nodes: bool = False, splitter=split_sentences) -> TextSegmenter:
    def segment(query: Query, doc: Document) -> list[TextFragment]:
        sentences = splitter(doc.body)
        fragment, trace = recur_split(query, doc, scorer, sentences=sentences)
        if collect_trace_nodes:
            return trace_fragments(doc, trace, sentences)
        return [fragment]

    return segment


def make_visual_segmenter(detector, thresholds: VisualFilterThresholds) -> VisualSegmenter:
    def segment(query: Query, doc: Document) -> list[VisualFragment]:
        return extract_visual_fragments(query, doc, detector, thresholds)

    return segment


def build_hybrid_pool(
    query: Query,
    sorted_docs: Sequence[Document],
    n_seg: int,
    text_segmenter: TextSegmenter,
    visual_segmenter: VisualSegmenter,
    parallelism: int = 1,
) -> list[EvidenceItem]:
    """Replace the top ``n_seg`` documents by their fragments and append the rest.

    Text documents are replaced entirely by their fragments; image documents
    are kept as an ``OriginalImage`` item followed by their regions. Documents
    ranked past ``n_seg`` enter unchanged as ``CoarseDoc`` items.
    """
    top, tail = list(sorted_docs[:n_seg]), sorted_docs[n_seg:]

    def segment(doc: Document) -> list[EvidenceItem]:
        try:
            if doc.is_image:
                regions = visual_segmenter(query, doc)
                return [EvidenceItem.original_image(doc)] + [EvidenceItem.visual_fragment(v) for v in regions]
            return [EvidenceItem.text_fragment(t) for t in text_segmenter(query, doc)]
        except FragselError as exc:
            exc.doc_id = doc.id
            exc.args = (f"{exc.args[0] if exc.args else exc} (document {doc.id!r})",) + exc.args[1:]
            raise

    pool, seen = [], set()
    for items in _map(segment, top, parallelism):
        for item in items:
            if item.key not in seen:
                seen.add(item.key)
                pool.append(item)
    pool.extend(EvidenceItem.coarse(d) for d in tail)
    return pool


def select_top_k(
    query: Query, pool: Sequence[EvidenceItem], selector_model, extractor, k: int
) -> list[EvidenceItem]:
    """Score the pool with the selector and keep the ``k`` best, scores attached.

    Equal logits keep pool order.
    """
    if k < 1:
        raise PreconditionViolation(f"k must be >= 1, got {k}")
    if not pool:
        return []
    logits = selector_model.decision(extractor.transform([(query, item) for item in pool]))
    order = sorted(range(len(pool)), key=lambda i: -logits[i])
    return [pool[i].with_score(float(logits[i])) for i in order[:k]]


@dataclass
class PipelineReport:
    query_id: str
    phase_latencies: dict[str, float] = field(default_factory=dict)
    pool_sizes: dict[str, int] = field(default_factory=dict)
    context_tokens: int = 0
    selected_items: list[EvidenceItem] = field(default_factory=list)
    answer: str = ""
    context_order: str = "selector_score_desc"
    mode: str = "fes"

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "mode": self.mode,
            "phase_latencies": dict(self.phase_latencies),
            "pool_sizes": dict(self.pool_sizes),
            "context_tokens": self.context_tokens,
            "context_order": self.context_order,
            "selected_items": [item.to_dict() for item in self.selected_items],
            "answer": self.answer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineReport":
        return cls(
            query_id=d["query_id"],
            phase_latencies=dict(d.get("phase_latencies", {})),
            pool_sizes=dict(d.get("pool_sizes", {})),
            context_tokens=int(d.get("context_tokens", 0)),
            selected_items=[EvidenceItem.from_dict(i) for i in d.get("selected_items", [])],
            answer=d.get("answer", ""),
            context_order=d.get("context_order", "selector_score_desc"),
            mode=d.get("mode", "fes"),
        )


def _phase_timer(clock: Callable[[], float], latencies: dict):
    @contextmanager
    def phase(name: str):
        start = clock()
        try:
            yield
        finally:
            latencies[name] = clock() - start

    return phase


def null_clock() -> float:
    """Clock that never advances, for byte-reproducible reports."""
    return 0.0


def retrieve_and_rerank(query: Query, config: Config, backends, timer) -> tuple[list[Document], list[Document]]:
    with timer("Retrieval"):
        candidates = list(backends.retriever.retrieve(query, config.n_ret))[: config.n_ret]
    if not candidates:
        raise EmptyRetrieval(f"retriever returned no documents for query {query.id!r}")
    with timer("Rerank"):
        sorted_docs = rerank(query, candidates, backends.scorer, config.parallelism)
    return candidates, sorted_docs


def run(
    query: Query,
    config: Config,
    backends,
    selector_model,
    extractor=None,
    clock: Callable[[], float] = time.perf_counter,
) -> tuple[str, PipelineReport]:
    """Answer one query end to end and account for every phase."""
    extractor = extractor or FragmentFeatureExtractor()
    report = PipelineReport(query.id)
    timer = _phase_timer(clock, report.phase_latencies)

    candidates, sorted_docs = retrieve_and_rerank(query, config, backends, timer)

    with timer("SegmentSelect"):
        text_seg = make_text_segmenter(backends.segment_scorer, config.collect_trace_nodes)
        visual_seg = make_visual_segmenter(backends.detector, VisualFilterThresholds.from_config(config))
        pool = build_hybrid_pool(query, sorted_docs, config.n_seg, text_seg, visual_seg, config.parallelism)
        selected = select_top_k(query, pool, selector_model, extractor, config.k)

    with timer("Generate"):
        answer = backends.generator.generate(query, selected)

    report.pool_sizes = {
        "retrieved": len(candidates),
        "sorted": len(sorted_docs),
        "segmented_docs": min(config.n_seg, len(sorted_docs)),
        "hybrid_pool": len(pool),
        "selected": len(selected),
    }
    report.selected_items = selected
    report.context_tokens = context_tokens(selected, config.image_token_cost)
    report.answer = answer
    report.phase_latencies = {p: report.phase_latencies[p] for p in PHASES}
    return answer, report
