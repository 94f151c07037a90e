"""Weakly supervised sentence-genre labeling by iterative bootstrapping.

Treebank-level genre metadata is the only supervision. Single-genre
treebanks seed a softmax classifier over fixed sentence embeddings; each
round the classifier's confident predictions (restricted to genres the
sentence's treebank is allowed to contain) grow the labeled pool, and a
per-treebank elimination rule fills in the last unaccounted genre. After
the round budget, survivors receive audited metadata-restricted argmax
labels so every sentence ends up with exactly one genre.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import Corpus, UD_GENRES, seeded_permutation
from .embed import EmbeddingMatrix
from .errors import DataError, FormatError

GENRE_INDEX = {genre: i for i, genre in enumerate(UD_GENRES)}
N_GENRES = len(UD_GENRES)

LABEL_SOURCES = ("seed", "threshold", "last-remaining", "fallback")


class LabelRecord(NamedTuple):
    genre: str
    source: str
    confidence: float


class GenreSoftmaxClassifier(BaseEstimator):
    """Linear softmax head over fixed sentence embeddings (always 18-way).

    Trained with seeded mini-batch gradient descent using decoupled weight
    decay (AdamW-style updates) on cross-entropy. A held-out fraction of the
    labeled data drives early stopping; the best-validation weights are
    restored at the end.
    """

    def __init__(
        self,
        learning_rate=1e-2,
        batch_size=16,
        max_epochs=100,
        patience=3,
        weight_decay=0.01,
        validation_fraction=0.1,
        seed=0,
    ):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.seed = seed

    def fit(self, X: np.ndarray, y: Sequence[int]):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or len(X) != len(y):
            raise DataError("X must be 2-D with one label per row")
        if not np.isfinite(X).all():
            raise DataError("training embeddings contain NaN or Inf")
        if y.min(initial=0) < 0 or y.max(initial=0) >= N_GENRES:
            raise DataError(f"labels must be in 0..{N_GENRES - 1}")
        if len(np.unique(y)) < 2:
            raise DataError("labeled set covers a single genre; nothing to discriminate")

        n, dim = X.shape
        rng = np.random.default_rng(self.seed)
        n_val = int(round(self.validation_fraction * n))
        n_val = min(max(n_val, 1), n - 1)
        order = rng.permutation(n)
        val_idx, train_idx = order[:n_val], order[n_val:]
        X_train, y_train = X[train_idx], y[train_idx]
        X_val, y_val = X[val_idx], y[val_idx]

        weights = np.zeros((dim, N_GENRES))
        bias = np.zeros(N_GENRES)
        m_w = np.zeros_like(weights)
        v_w = np.zeros_like(weights)
        m_b = np.zeros_like(bias)
        v_b = np.zeros_like(bias)
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0

        best_val = np.inf
        best = (weights.copy(), bias.copy())
        bad_epochs = 0
        n_train = len(X_train)
        history: list[float] = []

        for _ in range(self.max_epochs):
            perm = rng.permutation(n_train)
            for start in range(0, n_train, self.batch_size):
                batch = perm[start : start + self.batch_size]
                xb, yb = X_train[batch], y_train[batch]
                probs = _softmax(xb @ weights + bias)
                probs[np.arange(len(batch)), yb] -= 1.0
                probs /= len(batch)
                g_w = xb.T @ probs
                g_b = probs.sum(axis=0)
                step += 1
                m_w = beta1 * m_w + (1 - beta1) * g_w
                v_w = beta2 * v_w + (1 - beta2) * g_w**2
                m_b = beta1 * m_b + (1 - beta1) * g_b
                v_b = beta2 * v_b + (1 - beta2) * g_b**2
                corr1 = 1 - beta1**step
                corr2 = 1 - beta2**step
                weights -= self.learning_rate * (
                    (m_w / corr1) / (np.sqrt(v_w / corr2) + eps) + self.weight_decay * weights
                )
                bias -= self.learning_rate * (m_b / corr1) / (np.sqrt(v_b / corr2) + eps)
            val_loss = _cross_entropy(_softmax(X_val @ weights + bias), y_val)
            history.append(val_loss)
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best = (weights.copy(), bias.copy())
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= self.patience:
                    break

        self.coef_, self.intercept_ = best
        self.val_loss_trace_ = history
        self.n_epochs_ = len(history)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if not np.isfinite(X).all():
            raise DataError("embedding input contains NaN or Inf")
        if X.shape[1] != self.coef_.shape[0]:
            raise DataError(
                f"dimension mismatch: classifier expects {self.coef_.shape[0]}, got {X.shape[1]}"
            )
        return _softmax(X @ self.coef_ + self.intercept_)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def save(self, path: str | Path) -> None:
        dim = self.coef_.shape[0]
        with open(path, "wb") as handle:
            handle.write(struct.pack("<II", dim, N_GENRES))
            handle.write(np.ascontiguousarray(self.coef_, dtype="<f4").tobytes())
            handle.write(np.ascontiguousarray(self.intercept_, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "GenreSoftmaxClassifier":
        data = Path(path).read_bytes()
        if len(data) < 8:
            raise FormatError(f"{path}: truncated classifier checkpoint")
        dim, n_classes = struct.unpack("<II", data[:8])
        if n_classes != N_GENRES:
            raise FormatError(f"{path}: expected {N_GENRES} classes, got {n_classes}")
        expected = 8 + 4 * (dim * n_classes + n_classes)
        if len(data) != expected:
            raise FormatError(f"{path}: expected {expected} bytes, got {len(data)}")
        weights = np.frombuffer(data[8 : 8 + 4 * dim * n_classes], dtype="<f4")
        bias = np.frombuffer(data[8 + 4 * dim * n_classes :], dtype="<f4")
        model = cls()
        model.coef_ = weights.reshape(dim, n_classes).astype(np.float64)
        model.intercept_ = bias.astype(np.float64)
        return model


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    picked = probs[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.clip(picked, 1e-300, None))))


def predict_genre(
    classifier: GenreSoftmaxClassifier, embedding: np.ndarray
) -> tuple[np.ndarray, str, float]:
    """Full 18-way distribution plus the argmax genre and its probability."""
    probs = classifier.predict_proba(np.asarray(embedding)[None, :])[0]
    best = int(np.argmax(probs))
    return probs, UD_GENRES[best], float(probs[best])


@dataclass
class BootState:
    """Labeling progress: grows monotonically, ends with no unlabeled ids."""

    round: int
    labeled: dict[str, LabelRecord]
    unlabeled: set[str]
    pool_codes: tuple[str, ...]
    classifier: GenreSoftmaxClassifier | None = field(default=None, repr=False)

    @property
    def source_counts(self) -> dict[str, int]:
        counts = {source: 0 for source in LABEL_SOURCES}
        for record in self.labeled.values():
            counts[record.source] += 1
        return counts

    @property
    def fallback_count(self) -> int:
        return self.source_counts["fallback"]


def init_seed_set(corpus: Corpus, excluded_languages: Sequence[str] = ()) -> BootState:
    """Label every sentence of every single-genre treebank with its genre.

    Treebanks in ``excluded_languages`` are removed from the pool entirely
    (both from seeding and from later prediction).
    """
    excluded = {lang.lower() for lang in excluded_languages}
    pool_codes = tuple(
        code for code in corpus.codes() if corpus.meta[code].language.lower() not in excluded
    )
    labeled: dict[str, LabelRecord] = {}
    unlabeled: set[str] = set()
    seeded = False
    for code in pool_codes:
        meta = corpus.meta[code]
        tb = corpus.treebanks[code]
        if meta.is_single_genre:
            seeded = True
            genre = next(iter(meta.genres))
            for sentence in tb.sentences():
                labeled[sentence.global_id] = LabelRecord(genre, "seed", 1.0)
        else:
            unlabeled.update(s.global_id for s in tb.sentences())
    if not seeded:
        raise DataError("no supervision seed: the pool contains no single-genre treebank")
    return BootState(round=0, labeled=labeled, unlabeled=unlabeled, pool_codes=pool_codes)


def train_classifier(
    state: BootState,
    embeddings: EmbeddingMatrix,
    train_cap: int = 40000,
    seed: int = 0,
    classifier_params: Mapping | None = None,
) -> GenreSoftmaxClassifier:
    """Fit the softmax head on the current labeled pool (capped, seeded)."""
    labeled_ids = sorted(state.labeled)
    if len(labeled_ids) > train_cap:
        perm = seeded_permutation(len(labeled_ids), f"{seed}:boot-cap:{state.round}")
        labeled_ids = [labeled_ids[i] for i in perm[:train_cap]]
    X = embeddings.rows[embeddings.positions(labeled_ids)]
    y = [GENRE_INDEX[state.labeled[gid].genre] for gid in labeled_ids]
    params = dict(classifier_params or {})
    params.setdefault("seed", seed + state.round)
    return GenreSoftmaxClassifier(**params).fit(X, y)


def bootstrap_labels(
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    excluded_languages: Sequence[str] = (),
    threshold: float = 0.99,
    max_rounds: int = 3,
    train_cap: int = 40000,
    seed: int = 0,
    classifier_params: Mapping | None = None,
) -> BootState:
    """Run the full bootstrap until every pool sentence carries a genre.

    Per round: (1) cap the labeled pool, (2) train the classifier, (3) label
    unlabeled sentences whose maximum probability exceeds ``threshold`` and
    whose argmax genre is allowed by their treebank's metadata, (4) apply
    the last-remaining-genre rule per treebank. Sentences still unlabeled
    after ``max_rounds`` get metadata-restricted argmax labels, reported as
    ``fallback`` (never hidden).
    """
    state = init_seed_set(corpus, excluded_languages)
    while state.unlabeled and state.round < max_rounds:
        state.round += 1
        state.classifier = train_classifier(
            state, embeddings, train_cap=train_cap, seed=seed, classifier_params=classifier_params
        )
        seeded_genres = {record.genre for record in state.labeled.values()}
        _threshold_pass(state, corpus, embeddings, threshold, seeded_genres)
        _last_remaining_pass(state, corpus)

    if state.unlabeled:
        if state.classifier is None:
            state.classifier = train_classifier(
                state, embeddings, train_cap=train_cap, seed=seed,
                classifier_params=classifier_params,
            )
        _fallback_pass(state, corpus, embeddings)
    return state


def _threshold_pass(
    state: BootState,
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    threshold: float,
    seeded_genres: set[str],
) -> None:
    assert state.classifier is not None
    for code in state.pool_codes:
        meta = corpus.meta[code]
        if not meta.genres & seeded_genres:
            continue
        candidate_ids = [
            s.global_id for s in corpus.treebanks[code].sentences() if s.global_id in state.unlabeled
        ]
        if not candidate_ids:
            continue
        probs = state.classifier.predict_proba(
            embeddings.rows[embeddings.positions(candidate_ids)]
        )
        best = np.argmax(probs, axis=1)
        best_p = probs[np.arange(len(candidate_ids)), best]
        for gid, genre_idx, p in zip(candidate_ids, best, best_p):
            genre = UD_GENRES[int(genre_idx)]
            if p > threshold and genre in meta.genres:
                state.labeled[gid] = LabelRecord(genre, "threshold", float(p))
                state.unlabeled.discard(gid)


def _last_remaining_pass(state: BootState, corpus: Corpus) -> None:
    for code in state.pool_codes:
        tb = corpus.treebanks[code]
        remaining = [s.global_id for s in tb.sentences() if s.global_id in state.unlabeled]
        if not remaining:
            continue
        represented = {
            state.labeled[s.global_id].genre
            for s in tb.sentences()
            if s.global_id in state.labeled
        }
        missing = corpus.meta[code].genres - represented
        if len(missing) == 1:
            genre = next(iter(missing))
            for gid in remaining:
                state.labeled[gid] = LabelRecord(genre, "last-remaining", 1.0)
                state.unlabeled.discard(gid)


def _fallback_pass(state: BootState, corpus: Corpus, embeddings: EmbeddingMatrix) -> None:
    assert state.classifier is not None
    for code in state.pool_codes:
        meta = corpus.meta[code]
        remaining = [
            s.global_id for s in corpus.treebanks[code].sentences() if s.global_id in state.unlabeled
        ]
        if not remaining:
            continue
        allowed = sorted(GENRE_INDEX[g] for g in meta.genres)
        probs = state.classifier.predict_proba(embeddings.rows[embeddings.positions(remaining)])
        choice = np.argmax(probs[:, allowed], axis=1)
        for row, (gid, local_idx) in enumerate(zip(remaining, choice)):
            genre_idx = allowed[int(local_idx)]
            state.labeled[gid] = LabelRecord(
                UD_GENRES[genre_idx], "fallback", float(probs[row, genre_idx])
            )
            state.unlabeled.discard(gid)


def write_labels(state: BootState, path: str | Path, config_hash: str = "") -> None:
    with open(path, "w", encoding="utf-8") as handle:
        if config_hash:
            handle.write(f"# config-hash: {config_hash}\n")
        handle.write("global_id\tgenre\tsource\tconfidence\n")
        for gid in sorted(state.labeled):
            record = state.labeled[gid]
            handle.write(f"{gid}\t{record.genre}\t{record.source}\t{record.confidence:.6f}\n")


def read_labels(path: str | Path) -> dict[str, LabelRecord]:
    labels: dict[str, LabelRecord] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line or line.startswith("#") or line.startswith("global_id\t"):
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise FormatError(f"{path}: bad label row {line!r}")
            if cols[1] not in GENRE_INDEX:
                raise FormatError(f"{path}: unknown genre {cols[1]!r}")
            labels[cols[0]] = LabelRecord(cols[1], cols[2], float(cols[3]))
    if not labels:
        raise FormatError(f"{path}: empty label file")
    return labels
