"""Character n-gram bags with document-frequency filtering.

No lowercasing, no stop lists, no language-specific preprocessing: the
features must stay comparable across scripts and languages.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError


def extract_ngrams(text: str, n_min: int = 3, n_max: int = 6) -> Counter:
    """All contiguous character n-grams of length ``n_min..n_max``.

    Operates on Unicode scalar values with case and whitespace preserved.
    Text shorter than ``n_min`` yields an empty multiset.
    """
    grams: Counter = Counter()
    length = len(text)
    for n in range(n_min, n_max + 1):
        for start in range(length - n + 1):
            grams[text[start : start + n]] += 1
    return grams


@dataclass
class NgramVocab:
    """Document-frequency filtered vocabulary with dense column indices."""

    grams: dict[str, int]
    doc_freq: dict[str, int]
    min_df: int
    max_df_ratio: float
    corpus_doc_count: int
    n_min: int = 3
    n_max: int = 6

    def __len__(self) -> int:
        return len(self.grams)


@dataclass
class SparseCounts:
    """One document as (column, count) pairs with strictly increasing columns."""

    doc_id: str
    entries: list[tuple[int, int]]

    @property
    def total(self) -> int:
        return sum(count for _, count in self.entries)


def build_vocab(
    texts: Iterable[str],
    min_df: int = 2,
    max_df_ratio: float = 0.30,
    n_min: int = 3,
    n_max: int = 6,
) -> NgramVocab:
    """Fit a vocabulary over per-sentence n-gram presence.

    Document frequency counts sentences containing a gram (presence, not
    occurrences). Grams kept satisfy ``min_df <= df <= floor(max_df_ratio *
    n_docs)``; columns are assigned in lexicographic gram order so the
    result is independent of iteration order.
    """
    df: Counter = Counter()
    n_docs = 0
    for text in texts:
        n_docs += 1
        df.update(set(extract_ngrams(text, n_min, n_max)))
    if n_docs == 0:
        raise DataError("cannot build a vocabulary from zero sentences")
    max_df = int(max_df_ratio * n_docs)
    kept = sorted(g for g, f in df.items() if min_df <= f <= max_df)
    if not kept:
        raise DataError(
            f"degenerate vocabulary: no gram survives df filters "
            f"(min_df={min_df}, max_df={max_df}, docs={n_docs})"
        )
    return NgramVocab(
        grams={g: i for i, g in enumerate(kept)},
        doc_freq={g: df[g] for g in kept},
        min_df=min_df,
        max_df_ratio=max_df_ratio,
        corpus_doc_count=n_docs,
        n_min=n_min,
        n_max=n_max,
    )


def vectorize(text: str, vocab: NgramVocab, doc_id: str = "") -> SparseCounts:
    """Count in-vocabulary grams; out-of-vocabulary grams are dropped."""
    grams = extract_ngrams(text, vocab.n_min, vocab.n_max)
    columns: dict[int, int] = {}
    for gram, count in grams.items():
        col = vocab.grams.get(gram)
        if col is not None:
            columns[col] = count
    return SparseCounts(doc_id=doc_id, entries=sorted(columns.items()))


def vocab_to_tsv(vocab: NgramVocab, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("gram\tdf\tcolumn\n")
        for gram in sorted(vocab.grams):
            handle.write(f"{gram}\t{vocab.doc_freq[gram]}\t{vocab.grams[gram]}\n")


class CharNgramVectorizer(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper around :func:`build_vocab` / :func:`vectorize`."""

    def __init__(self, n_min=3, n_max=6, min_df=2, max_df_ratio=0.30):
        self.n_min = n_min
        self.n_max = n_max
        self.min_df = min_df
        self.max_df_ratio = max_df_ratio

    def fit(self, texts: Sequence[str], y=None):
        self.vocab_ = build_vocab(
            texts,
            min_df=self.min_df,
            max_df_ratio=self.max_df_ratio,
            n_min=self.n_min,
            n_max=self.n_max,
        )
        return self

    def transform(self, texts: Sequence[str]) -> list[SparseCounts]:
        if not hasattr(self, "vocab_"):
            raise DataError("vectorizer is not fitted")
        return [vectorize(t, self.vocab_, doc_id=str(i)) for i, t in enumerate(texts)]
