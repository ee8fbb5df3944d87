"""Bundled demo scenario: one query over a six-document mixed-modality corpus."""
from __future__ import annotations

from pathlib import Path

from ..backends import Backends, MockBackend, mock_from_fixture
from ..config import Config, load_config
from ..io import read_documents, read_queries
from ..selector import SelectorModel

DEMO_DIR = Path(__file__).resolve().parent
FIXTURES = DEMO_DIR / "fixtures"
CORPUS = DEMO_DIR / "corpus.jsonl"
QUERIES = DEMO_DIR / "queries.jsonl"
CONFIG = DEMO_DIR / "config.txt"
MODEL = DEMO_DIR / "model.json"
FIG_SAMPLES = DEMO_DIR / "fig_samples.jsonl"


def load_demo():
    """Return ``(corpus, queries, config, backends, mock, model)``.

    All backend roles share one :class:`MockBackend`, returned separately so
    callers can inspect its call log.
    """
    corpus = read_documents(CORPUS)
    queries = read_queries(QUERIES)
    config: Config = load_config(CONFIG)
    mock: MockBackend = mock_from_fixture(FIXTURES, corpus)
    backends = Backends(retriever=mock, scorer=mock, detector=mock, generator=mock)
    return corpus, queries, config, backends, mock, SelectorModel.load(MODEL)
