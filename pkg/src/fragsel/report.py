"""Run manifests, FIG interval histograms and aggregate run tables."""
from __future__ import annotations

import os
import statistics
from bisect import bisect_left
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

from . import __version__
from .errors import UnsortedEdges
from .pipeline import PHASES


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    backends: dict
    seed: int
    version: str = __version__
    created_at: str = field(default_factory=lambda: manifest_timestamp())

    def to_dict(self) -> dict:
        return asdict(self)


def manifest_timestamp() -> str:
    """UTC timestamp, pinned by ``SOURCE_DATE_EPOCH`` when that is set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return moment.replace(microsecond=0).isoformat()


def _fig_value(record) -> float:
    return float(getattr(record, "fig", record))


def bucket_fig(records: Iterable, edges: Sequence[float]) -> list[int]:
    """Count FIG values per interval ``(-inf, e0], (e0, e1], ..., (e_last, inf)``.

    ``records`` may hold FIG records or bare floats.
    """
    edges = list(edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise UnsortedEdges(f"bucket edges must be strictly increasing, got {edges}")
    counts = [0] * (len(edges) + 1)
    for r in records:
        counts[bisect_left(edges, _fig_value(r))] += 1
    return counts


def bucket_labels(edges: Sequence[float]) -> list[str]:
    if not edges:
        return ["all"]
    labels = [f"FIG <= {edges[0]}"]
    labels += [f"{a} < FIG <= {b}" for a, b in zip(edges, edges[1:])]
    labels.append(f"FIG > {edges[-1]}")
    return labels


def aggregate(results: Sequence[dict]) -> dict:
    """Mean and total context tokens and per-phase latencies, grouped by run mode."""
    by_mode: dict[str, list[dict]] = {}
    for r in results:
        report = r["report"]
        by_mode.setdefault(report.get("mode", "fes"), []).append(report)
    summary = {}
    for mode, reports in sorted(by_mode.items()):
        tokens = [rep["context_tokens"] for rep in reports]
        latencies = {p: [rep["phase_latencies"].get(p, 0.0) for rep in reports] for p in PHASES}
        summary[mode] = {
            "queries": len(reports),
            "context_tokens_total": sum(tokens),
            "context_tokens_mean": statistics.fmean(tokens),
            "latency_mean": {p: statistics.fmean(v) for p, v in latencies.items()},
            "latency_total_mean": statistics.fmean(sum(rep["phase_latencies"].values()) for rep in reports),
        }
    return summary


def format_tables(summary: dict) -> str:
    lines = ["Context tokens", f"{'mode':<10} {'queries':>7} {'total':>10} {'mean':>10}"]
    for mode, s in summary.items():
        lines.append(f"{mode:<10} {s['queries']:>7} {s['context_tokens_total']:>10} {s['context_tokens_mean']:>10.1f}")
    lines += ["", "Mean latency per phase (s)", f"{'mode':<10} " + " ".join(f"{p:>14}" for p in PHASES) + f" {'total':>10}"]
    for mode, s in summary.items():
        cells = " ".join(f"{s['latency_mean'][p]:>14.6f}" for p in PHASES)
        lines.append(f"{mode:<10} {cells} {s['latency_total_mean']:>10.6f}")
    return "\n".join(lines)


def format_fig_histogram(counts: Sequence[int], edges: Sequence[float]) -> str:
    lines = ["FIG interval (left-open, right-closed)", f"{'interval':<24} {'count':>7}"]
    for label, count in zip(bucket_labels(edges), counts):
        lines.append(f"{label:<24} {count:>7}")
    return "\n".join(lines)
