"""Minimal CoNLL-U reading: sentence ids and surface text only.

Iteration order mirrors the consumer toolkit's canonical corpus order:
treebank directories sorted by name, splits in train/dev/test order,
sentences in file order. Global ids are ``treebank/split/sent_id``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

_SPLIT_RE = re.compile(r"(?:^|[-._])(train|dev|test)\.conllu$")
_SPLIT_ORDER = {"train": 0, "dev": 1, "test": 2}


@dataclass(slots=True)
class SentenceText:
    global_id: str
    text: str


def _reconstruct(rows: list[list[str]]) -> str:
    parts: list[str] = []
    skip_until = 0
    for cols in rows:
        row_id = cols[0]
        if "." in row_id:
            continue
        if "-" in row_id:
            start, end = row_id.split("-")
            skip_until = int(end)
            parts.append(cols[1])
            if "SpaceAfter=No" not in cols[9]:
                parts.append(" ")
            continue
        if int(row_id) <= skip_until:
            continue
        parts.append(cols[1])
        if "SpaceAfter=No" not in cols[9]:
            parts.append(" ")
    return "".join(parts).rstrip()


def read_sentences(path: Path, treebank: str, split: str) -> Iterator[SentenceText]:
    sent_id: str | None = None
    text: str | None = None
    rows: list[list[str]] = []
    ordinal = 0

    def flush() -> SentenceText | None:
        nonlocal sent_id, text, rows, ordinal
        if not rows and sent_id is None and text is None:
            return None
        ordinal += 1
        sid = sent_id if sent_id is not None else str(ordinal)
        surface = text if text is not None else _reconstruct(rows)
        sentence = SentenceText(global_id=f"{treebank}/{split}/{sid}", text=surface)
        sent_id, text, rows = None, None, []
        return sentence

    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                done = flush()
                if done is not None:
                    yield done
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("sent_id") and "=" in body:
                    sent_id = body.split("=", 1)[1].strip()
                elif body.startswith("text") and "=" in body and not body.startswith("text_"):
                    text = body.split("=", 1)[1].strip()
                continue
            cols = line.split("\t")
            if len(cols) == 10:
                rows.append(cols)
    done = flush()
    if done is not None:
        yield done


def iter_corpus(root: str | Path) -> Iterator[SentenceText]:
    """Every sentence under ``root`` in canonical order."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root is not a directory: {root}")
    for directory in sorted(p for p in root.iterdir() if p.is_dir()):
        files = []
        for conllu in directory.glob("*.conllu"):
            match = _SPLIT_RE.search(conllu.name)
            if not match:
                raise ValueError(f"{conllu}: cannot infer split from filename")
            files.append((_SPLIT_ORDER[match.group(1)], conllu.name, match.group(1), conllu))
        for _, _, split, conllu in sorted(files):
            yield from read_sentences(conllu, treebank=directory.name, split=split)
