"""Coarse-document baselines: plain top-k and brute-force token truncation."""
from __future__ import annotations

import time
from typing import Callable, Sequence

from .config import Config
from .errors import PreconditionViolation
from .pipeline import PipelineReport, _phase_timer, retrieve_and_rerank
from .types import Document, EvidenceItem, Query, context_tokens


def coarse_context(sorted_docs: Sequence[Document], k: int) -> list[EvidenceItem]:
    return [EvidenceItem.coarse(d) for d in sorted_docs[:k]]


def truncate_baseline(
    query: Query, sorted_docs: Sequence[Document], token_budget: int, image_token_cost: int = 256
) -> list[EvidenceItem]:
    """Fill ``token_budget`` with whole documents in rank order.

    The first text document that does not fit is cut to its longest
    whole-token prefix that does, and filling stops there. Images cost
    ``image_token_cost`` and are taken whole or skipped.
    """
    if token_budget < 0:
        raise PreconditionViolation(f"token budget must be >= 0, got {token_budget}")
    context, remaining = [], token_budget
    for doc in sorted_docs:
        if remaining <= 0:
            break
        if doc.is_image:
            if image_token_cost <= remaining:
                context.append(EvidenceItem.coarse(doc))
                remaining -= image_token_cost
            continue
        if doc.token_count <= remaining:
            context.append(EvidenceItem.coarse(doc))
            remaining -= doc.token_count
            continue
        prefix = " ".join(doc.body.split()[:remaining])
        context.append(EvidenceItem.coarse(Document.text(doc.id, prefix)))
        break
    return context


def run_baseline(
    query: Query,
    config: Config,
    backends,
    mode: str,
    budget: int | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> tuple[str, PipelineReport]:
    """Answer ``query`` from coarse documents only.

    ``mode`` is ``"coarse"`` (top ``config.k`` reranked documents) or
    ``"truncate"`` (reranked documents cut to ``budget`` tokens).
    """
    report = PipelineReport(query.id, mode=mode, context_order="rerank_desc")
    timer = _phase_timer(clock, report.phase_latencies)
    candidates, sorted_docs = retrieve_and_rerank(query, config, backends, timer)
    with timer("SegmentSelect"):
        if mode == "coarse":
            selected = coarse_context(sorted_docs, config.k)
        elif mode == "truncate":
            if budget is None:
                raise PreconditionViolation("truncate baseline needs a token budget")
            selected = truncate_baseline(query, sorted_docs, budget, config.image_token_cost)
        else:
            raise PreconditionViolation(f"unknown baseline mode {mode!r}")
    with timer("Generate"):
        answer = backends.generator.generate(query, selected)
    report.pool_sizes = {
        "retrieved": len(candidates),
        "sorted": len(sorted_docs),
        "segmented_docs": 0,
        "hybrid_pool": len(sorted_docs),
        "selected": len(selected),
    }
    report.selected_items = selected
    report.context_tokens = context_tokens(selected, config.image_token_cost)
    report.answer = answer
    return answer, report
