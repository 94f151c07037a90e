"""Corpus statistics and evaluation: genre-distribution bounds, selection
proportion matrices, attachment scoring and significance testing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, Sentence, TreebankMeta, UD_GENRES
from .errors import DataError
from .select import SelectionManifest


@dataclass
class GenreBounds:
    """Sentence-count bounds for one genre over a treebank registry.

    ``lower`` counts only single-genre treebanks of the genre, ``upper``
    every treebank containing it, ``uniform`` assumes genres are evenly
    distributed within each treebank.
    """

    genre: str
    lower: int
    upper: int
    uniform: float
    treebank_count: int


def genre_bounds(registry: Mapping[str, TreebankMeta]) -> dict[str, GenreBounds]:
    """Bounds for all 18 genres; genres absent from the registry get zeros."""
    bounds = {
        genre: GenreBounds(genre=genre, lower=0, upper=0, uniform=0.0, treebank_count=0)
        for genre in UD_GENRES
    }
    for meta in registry.values():
        size = meta.size
        share = size / len(meta.genres)
        for genre in meta.genres:
            entry = bounds[genre]
            entry.upper += size
            entry.uniform += share
            entry.treebank_count += 1
            if meta.is_single_genre:
                entry.lower += size
    return bounds


def registry_size(registry: Mapping[str, TreebankMeta]) -> int:
    return sum(meta.size for meta in registry.values())


def bounds_to_tsv(
    bounds: Mapping[str, GenreBounds], total: int, path: str | Path, config_hash: str = ""
) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        if config_hash:
            handle.write(f"# config-hash: {config_hash}\n")
        handle.write(
            "genre\ttreebanks\tlower\tupper\tuniform\tlower_pct\tupper_pct\tuniform_pct\n"
        )
        for genre in UD_GENRES:
            entry = bounds[genre]
            pct = (lambda x: 100.0 * x / total if total else 0.0)
            handle.write(
                f"{genre}\t{entry.treebank_count}\t{entry.lower}\t{entry.upper}\t"
                f"{entry.uniform:.1f}\t{pct(entry.lower):.2f}\t{pct(entry.upper):.2f}\t"
                f"{pct(entry.uniform):.2f}\n"
            )


def selection_matrix(manifest: SelectionManifest, corpus: Corpus) -> dict[str, float]:
    """Per-treebank selection proportions, max-normalized to [0, 1].

    Rows exist for every corpus treebank, including zero rows. Ids that do
    not resolve to a corpus sentence are an error.
    """
    counts = {code: 0 for code in corpus.codes()}
    for gid in manifest.ids:
        if not corpus.has(gid):
            raise DataError(f"manifest id not in corpus: {gid}")
        counts[gid.split("/", 1)[0]] += 1
    peak = max(counts.values(), default=0)
    if peak == 0:
        raise DataError("manifest selects nothing from this corpus")
    return {code: counts[code] / peak for code in counts}


def matrix_to_tsv(matrix: Mapping[str, float], path: str | Path, config_hash: str = "") -> None:
    with open(path, "w", encoding="utf-8") as handle:
        if config_hash:
            handle.write(f"# config-hash: {config_hash}\n")
        handle.write("treebank\tproportion\n")
        for code in sorted(matrix):
            handle.write(f"{code}\t{matrix[code]:.6f}\n")


@dataclass
class AttachmentScore:
    las: float
    uas: float
    scored_tokens: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.las <= self.uas <= 100.0:
            raise DataError(f"invalid attachment score las={self.las}, uas={self.uas}")


def _base_deprel(deprel: str) -> str:
    return deprel.split(":", 1)[0]


def _aligned_pairs(
    gold: Iterable[Sentence], pred: Iterable[Sentence]
) -> list[tuple[Sentence, Sentence]]:
    gold_by_id = {s.global_id: s for s in gold}
    pred_by_id = {s.global_id: s for s in pred}
    if set(gold_by_id) != set(pred_by_id):
        only_gold = sorted(set(gold_by_id) - set(pred_by_id))[:3]
        only_pred = sorted(set(pred_by_id) - set(gold_by_id))[:3]
        raise DataError(
            f"gold/pred sentence sets differ (gold-only {only_gold}, pred-only {only_pred})"
        )
    pairs = []
    for gid, gold_sentence in gold_by_id.items():
        pred_sentence = pred_by_id[gid]
        if len(gold_sentence) != len(pred_sentence):
            raise DataError(
                f"{gid}: token count mismatch ({len(gold_sentence)} gold, "
                f"{len(pred_sentence)} predicted); re-tokenized output is not scorable"
            )
        pairs.append((gold_sentence, pred_sentence))
    return pairs


def _count_correct(
    gold_sentence: Sentence, pred_sentence: Sentence, strip_subtypes: bool
) -> tuple[int, int, int]:
    heads_ok = 0
    labels_ok = 0
    total = 0
    for g, p in zip(gold_sentence.tokens, pred_sentence.tokens):
        total += 1
        if g.head == p.head:
            heads_ok += 1
            g_rel = _base_deprel(g.deprel) if strip_subtypes else g.deprel
            p_rel = _base_deprel(p.deprel) if strip_subtypes else p.deprel
            if g_rel == p_rel:
                labels_ok += 1
    return heads_ok, labels_ok, total


def las_uas(
    gold: Iterable[Sentence], pred: Iterable[Sentence], strip_subtypes: bool = True
) -> AttachmentScore:
    """Labeled/unlabeled attachment scores over aligned sentences.

    Only plain integer-id rows are scored (ranges and empty nodes are not);
    punctuation is included. By default the dependency relation is compared
    up to the first ":" subtype separator.
    """
    pairs = _aligned_pairs(gold, pred)
    heads_ok = labels_ok = total = 0
    for gold_sentence, pred_sentence in pairs:
        h, l, t = _count_correct(gold_sentence, pred_sentence, strip_subtypes)
        heads_ok += h
        labels_ok += l
        total += t
    if total == 0:
        raise DataError("no scorable tokens")
    return AttachmentScore(
        las=100.0 * labels_ok / total,
        uas=100.0 * heads_ok / total,
        scored_tokens=total,
    )


def per_sentence_las(
    gold: Iterable[Sentence], pred: Iterable[Sentence], strip_subtypes: bool = True
) -> dict[str, float]:
    scores = {}
    for gold_sentence, pred_sentence in _aligned_pairs(gold, pred):
        _, labels_ok, total = _count_correct(gold_sentence, pred_sentence, strip_subtypes)
        if total == 0:
            raise DataError(f"{gold_sentence.global_id}: no scorable tokens")
        scores[gold_sentence.global_id] = 100.0 * labels_ok / total
    return scores


@dataclass
class SignificanceResult:
    p_value: float
    resamples: int
    adjusted_alpha: float
    significant: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise DataError(f"p-value out of range: {self.p_value}")


def paired_sign_test(
    gold: Sequence[Sentence],
    pred_a: Sequence[Sentence],
    pred_b: Sequence[Sentence],
    resamples: int = 10000,
    seed: int = 0,
    alpha: float = 0.05,
) -> SignificanceResult:
    """One-sided paired bootstrap test of system B outperforming system A.

    Sentences are resampled with replacement; the p-value is the proportion
    of resamples in which B's mean per-sentence LAS does not exceed A's.
    Each resample derives its own generator from (seed, index) so the result
    is independent of execution order.
    """
    scores_a = per_sentence_las(gold, pred_a)
    scores_b = per_sentence_las(gold, pred_b)
    ids = sorted(scores_a)
    if not ids:
        raise DataError("no sentences to test")
    diffs = np.array([scores_b[gid] - scores_a[gid] for gid in ids])
    n = len(diffs)
    not_better = 0
    for index in range(resamples):
        rng = np.random.default_rng([seed, index])
        sample = diffs[rng.integers(0, n, size=n)]
        if sample.mean() <= 0.0:
            not_better += 1
    p = not_better / resamples
    return SignificanceResult(
        p_value=p, resamples=resamples, adjusted_alpha=alpha, significant=p < alpha
    )


def bonferroni(
    p: float, comparisons: int, alpha: float = 0.05, resamples: int = 0
) -> SignificanceResult:
    """Adjust the significance level for multiple comparisons."""
    if comparisons < 1:
        raise DataError(f"comparisons must be >= 1, got {comparisons}")
    adjusted = alpha / comparisons
    return SignificanceResult(
        p_value=p, resamples=resamples, adjusted_alpha=adjusted, significant=p < adjusted
    )


def aggregate_seeds(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation across seed runs."""
    if not values:
        raise DataError("no scores to aggregate")
    mean = sum(values) / len(values)
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(variance)
