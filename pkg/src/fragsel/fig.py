"""Fragment Information Gain: scoring, hard labels and dataset construction."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import BackendFailure, DataError, LengthMismatch, PreconditionViolation
from .types import EvidenceItem, Query


@dataclass(frozen=True)
class TokenLogProbs:
    answer_tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "answer_tokens", tuple(self.answer_tokens))
        object.__setattr__(self, "logprobs", tuple(float(v) for v in self.logprobs))
        if not self.logprobs or len(self.logprobs) != len(self.answer_tokens):
            raise LengthMismatch(
                f"{len(self.answer_tokens)} answer tokens but {len(self.logprobs)} logprobs"
            )
        if not all(math.isfinite(v) and v <= 0.0 for v in self.logprobs):
            raise DataError("log-probabilities must be finite and <= 0")

    def mean(self) -> float:
        return math.fsum(self.logprobs) / len(self.logprobs)


def fig_score(with_fragment: TokenLogProbs, without_fragment: TokenLogProbs) -> float:
    """Gain in mean per-token log-likelihood of the answer from adding a fragment."""
    if with_fragment.answer_tokens != without_fragment.answer_tokens:
        raise LengthMismatch("conditioned and baseline log-probs cover different answer tokens")
    return with_fragment.mean() - without_fragment.mean()


def hard_label(fig: float, tau_fig: float) -> int:
    return 1 if fig > tau_fig else 0


@dataclass(frozen=True)
class FigRecord:
    query_id: str
    fragment: EvidenceItem
    fig: float
    hard_label: int
    teacher_logit: float | None = None
    tau_fig: float = 0.2
    query_text: str | None = None

    def __post_init__(self):
        if self.hard_label != hard_label(self.fig, self.tau_fig):
            raise DataError(
                f"record {self.query_id!r}: label {self.hard_label} inconsistent with fig={self.fig}, tau={self.tau_fig}"
            )

    @property
    def query(self) -> Query:
        return Query(self.query_id, self.query_text or "")

    def to_dict(self) -> dict:
        d = {
            "query_id": self.query_id,
            "fragment": self.fragment.to_dict(),
            "fig": self.fig,
            "hard_label": self.hard_label,
            "teacher_logit": self.teacher_logit,
            "tau_fig": self.tau_fig,
        }
        if self.query_text is not None:
            d["query_text"] = self.query_text
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FigRecord":
        try:
            teacher = d.get("teacher_logit")
            return cls(
                query_id=str(d["query_id"]),
                fragment=EvidenceItem.from_dict(d["fragment"]),
                fig=float(d["fig"]),
                hard_label=int(d["hard_label"]),
                teacher_logit=None if teacher is None else float(teacher),
                tau_fig=float(d.get("tau_fig", 0.2)),
                query_text=d.get("query_text"),
            )
        except KeyError as exc:
            raise DataError(f"FIG record is missing {exc.args[0]!r}") from None


@dataclass(frozen=True)
class FigSample:
    """One supervision input: a query, its reference answer and candidate fragments."""

    query: Query
    answer_tokens: tuple[str, ...]
    fragments: tuple[EvidenceItem, ...]

    @classmethod
    def from_dict(cls, d: dict) -> "FigSample":
        try:
            return cls(
                Query(str(d["query_id"]), d["query_text"], d.get("query_image_ref")),
                tuple(d["answer_tokens"]),
                tuple(EvidenceItem.from_dict(f) for f in d["fragments"]),
            )
        except KeyError as exc:
            raise DataError(f"FIG sample is missing {exc.args[0]!r}") from None


def _tag(exc: BackendFailure, query: Query, fragment: EvidenceItem | None) -> BackendFailure:
    where = f"query {query.id!r}" + (f", fragment {fragment.key!r}" if fragment is not None else " (baseline)")
    exc.query_id = query.id
    exc.fragment_key = fragment.key if fragment is not None else None
    exc.args = (f"{exc.args[0] if exc.args else exc}: {where}",) + exc.args[1:]
    return exc


def build_fig_dataset(
    samples: Sequence[FigSample],
    likelihood,
    teacher=None,
    config=None,
    parallelism: int | None = None,
) -> list[FigRecord]:
    """Score every (query, fragment) pair and label it.

    The fragment-free baseline is requested once per query and shared by all
    of that query's fragments, so the likelihood backend sees exactly
    ``len(samples) + total fragments`` calls. Records come back in input order
    whatever ``parallelism`` is.
    """
    from .config import Config

    config = config or Config()
    workers = parallelism or config.parallelism
    for s in samples:
        if not s.fragments:
            raise PreconditionViolation(f"query {s.query.id!r} has no fragments")

    def call(query, fragment, tokens):
        try:
            return likelihood.logprobs(query, fragment, tokens)
        except BackendFailure as exc:
            raise _tag(exc, query, fragment)

    def teacher_call(query, fragment):
        try:
            return float(teacher.logit(query, fragment))
        except BackendFailure as exc:
            raise _tag(exc, query, fragment)

    jobs = []
    for s in samples:
        jobs.append((s.query, None, s.answer_tokens))
        jobs.extend((s.query, f, s.answer_tokens) for f in s.fragments)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: call(*j), jobs))
            logits = (
                list(pool.map(lambda j: teacher_call(j[0], j[1]), [j for j in jobs if j[1] is not None]))
                if teacher is not None
                else None
            )
    else:
        results = [call(*j) for j in jobs]
        logits = [teacher_call(q, f) for q, f, _ in jobs if f is not None] if teacher is not None else None

    records, pos, frag_index = [], 0, 0
    for s in samples:
        baseline = results[pos]
        pos += 1
        for fragment in s.fragments:
            fig = fig_score(results[pos], baseline)
            pos += 1
            records.append(
                FigRecord(
                    query_id=s.query.id,
                    fragment=fragment,
                    fig=fig,
                    hard_label=hard_label(fig, config.tau_fig),
                    teacher_logit=logits[frag_index] if logits is not None else None,
                    tau_fig=config.tau_fig,
                    query_text=s.query.text,
                )
            )
            frag_index += 1
    return records


def dump_fig_records(records: Iterable[FigRecord], header: dict) -> str:
    lines = [json.dumps({"header": header}, sort_keys=True)]
    lines += [json.dumps(r.to_dict(), sort_keys=True) for r in records]
    return "\n".join(lines) + "\n"


def load_fig_records(lines: Iterable[str]) -> tuple[dict, list[FigRecord]]:
    header, records = {}, []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if "header" in obj and lineno == 1:
            header = obj["header"]
        else:
            records.append(FigRecord.from_dict(obj))
    return header, records
