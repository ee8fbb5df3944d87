"""JSON / JSONL readers and writers for corpora, queries and run results."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError
from .types import Document, Query


def iter_jsonl(path: str | Path) -> Iterator[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg})") from None


def read_documents(path: str | Path) -> list[Document]:
    return [Document.from_dict(d) for d in iter_jsonl(path) if "manifest" not in d]


def read_queries(path: str | Path) -> list[Query]:
    return [Query.from_dict(d) for d in iter_jsonl(path) if "manifest" not in d]


def read_single(path: str | Path) -> dict:
    """First object of a JSON or JSONL file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return next(iter_jsonl(path))


def dumps_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def write_jsonl(path: str | Path, rows: Iterable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps_line(row) + "\n")


def read_results(path: str | Path) -> tuple[dict | None, list[dict]]:
    manifest, rows = None, []
    for obj in iter_jsonl(path):
        if "manifest" in obj:
            manifest = obj["manifest"]
        else:
            rows.append(obj)
    return manifest, rows
