"""Per-treebank clustering into k = |metadata genres| clusters.

Two unsupervised routes: Gaussian mixtures over sentence embeddings
(seeded EM, k-means++ initialization) and latent topic assignment over
character n-gram bags (collapsed Gibbs sampling). Both label every
sentence of a treebank; cluster means always live in embedding space so
downstream closest-cluster selection is method-agnostic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .corpus import Treebank, TreebankMeta
from .embed import EmbeddingMatrix, mean_embedding, save_embeddings, load_embeddings
from .errors import DataError, FormatError
from .ngrams import SparseCounts, build_vocab, vectorize


class GaussianMixtureEM(BaseEstimator):
    """Gaussian mixture model fit by expectation-maximization.

    Initialization is a short seeded k-means run (k-means++ seeding plus a
    few Lloyd iterations), uniform weights, and the pooled within-cluster
    covariance of that assignment. Convergence is declared when the relative
    change of the mean per-sample log-likelihood drops below ``tol``. A ridge
    of ``reg_covar`` is added to covariance diagonals at every M-step; if a
    covariance still fails to factorize, the ridge is escalated tenfold up
    to three times before giving up.

    Attributes after ``fit``: ``weights_``, ``means_``, ``covariances_``,
    ``log_likelihood_trace_`` (mean per-sample, one entry per EM iteration),
    ``converged_``, ``n_iter_``, ``reg_covar_used_``.
    """

    def __init__(
        self,
        n_components=1,
        covariance="full",
        reg_covar=1e-6,
        max_iter=100,
        tol=1e-3,
        n_init=1,
        seed=0,
    ):
        self.n_components = n_components
        self.covariance = covariance
        self.reg_covar = reg_covar
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.seed = seed

    def fit(self, X: np.ndarray):
        X = self._validate(X)
        best = None
        for init_idx in range(self.n_init):
            rng = np.random.default_rng([self.seed, init_idx])
            run = self._fit_once_with_escalation(X, rng)
            if best is None or run["trace"][-1] > best["trace"][-1]:
                best = run
        assert best is not None
        self.weights_ = best["weights"]
        self.means_ = best["means"]
        self.covariances_ = best["covariances"]
        self.log_likelihood_trace_ = best["trace"]
        self.converged_ = best["converged"]
        self.n_iter_ = len(best["trace"])
        self.reg_covar_used_ = best["reg"]
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Argmax posterior responsibility; ties go to the lowest component."""
        log_resp = self._log_resp(np.asarray(X, dtype=np.float64))
        return np.argmax(log_resp, axis=1)

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        """Per-row log-likelihood under the mixture."""
        X = np.asarray(X, dtype=np.float64)
        weighted = self._log_density(X, self.means_, self.covariances_) + np.log(self.weights_)
        return logsumexp(weighted, axis=1)

    # internals

    def _validate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"expected 2-D data, got shape {X.shape}")
        if not np.isfinite(X).all():
            raise DataError("input contains NaN or Inf")
        k = self.n_components
        if k < 1:
            raise DataError(f"n_components must be >= 1, got {k}")
        if X.shape[0] < k:
            raise DataError(f"need at least {k} rows to fit {k} components, got {X.shape[0]}")
        if self.covariance not in ("full", "diag"):
            raise DataError(f"unknown covariance type {self.covariance!r}")
        return X

    def _fit_once_with_escalation(self, X: np.ndarray, rng: np.random.Generator) -> dict:
        reg = float(self.reg_covar)
        state = rng.bit_generator.state
        for _ in range(4):
            rng.bit_generator.state = state
            try:
                return self._fit_once(X, rng, reg)
            except np.linalg.LinAlgError:
                reg *= 10.0
        raise DataError(
            f"covariance stayed singular after escalating reg_covar to {reg / 10.0:g}"
        )

    def _fit_once(self, X: np.ndarray, rng: np.random.Generator, reg: float) -> dict:
        n, d = X.shape
        k = self.n_components
        means, nearest = _kmeans_init(X, k, rng)
        weights = np.full(k, 1.0 / k)
        # Pooled within-cluster covariance of the hard k-means assignment.
        # Total-data covariance is too wide: a single stretched component can
        # then explain separated blobs and EM collapses onto it.
        centered = X - means[nearest]
        if self.covariance == "full":
            pooled = (centered.T @ centered) / n + reg * np.eye(d)
            covariances = np.repeat(pooled[None, :, :], k, axis=0)
        else:
            pooled = (centered**2).mean(axis=0) + reg
            covariances = np.repeat(pooled[None, :], k, axis=0)

        trace: list[float] = []
        converged = False
        prev = None
        for _ in range(self.max_iter):
            log_dens = self._log_density(X, means, covariances)
            weighted = log_dens + np.log(weights)
            log_norm = logsumexp(weighted, axis=1)
            ll = float(np.mean(log_norm))
            if not np.isfinite(ll):
                raise np.linalg.LinAlgError("non-finite log-likelihood")
            trace.append(ll)
            if prev is not None and abs(ll - prev) / max(abs(prev), 1e-10) < self.tol:
                converged = True
                break
            prev = ll
            resp = np.exp(weighted - log_norm[:, None])
            nk = resp.sum(axis=0) + 10.0 * np.finfo(float).eps
            weights = nk / n
            means = (resp.T @ X) / nk[:, None]
            if self.covariance == "full":
                covariances = np.empty((k, d, d))
                for j in range(k):
                    diff = X - means[j]
                    covariances[j] = (resp[:, j, None] * diff).T @ diff / nk[j]
                    covariances[j].flat[:: d + 1] += reg
            else:
                covariances = np.empty((k, d))
                for j in range(k):
                    diff = X - means[j]
                    covariances[j] = (resp[:, j] @ diff**2) / nk[j] + reg
        return {
            "weights": weights,
            "means": means,
            "covariances": covariances,
            "trace": trace,
            "converged": converged,
            "reg": reg,
        }

    def _log_density(
        self, X: np.ndarray, means: np.ndarray, covariances: np.ndarray
    ) -> np.ndarray:
        n, d = X.shape
        k = means.shape[0]
        out = np.empty((n, k))
        const = d * np.log(2.0 * np.pi)
        if not np.isfinite(covariances).all():
            raise np.linalg.LinAlgError("non-finite covariance")
        if self.covariance == "full":
            for j in range(k):
                chol = np.linalg.cholesky(covariances[j])
                log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
                solved = solve_triangular(chol, (X - means[j]).T, lower=True)
                maha = np.sum(solved**2, axis=0)
                out[:, j] = -0.5 * (const + log_det + maha)
        else:
            for j in range(k):
                var = covariances[j]
                if np.any(var <= 0):
                    raise np.linalg.LinAlgError("non-positive variance")
                log_det = float(np.sum(np.log(var)))
                maha = np.sum((X - means[j]) ** 2 / var, axis=1)
                out[:, j] = -0.5 * (const + log_det + maha)
        return out

    def _log_resp(self, X: np.ndarray) -> np.ndarray:
        weighted = self._log_density(X, self.means_, self.covariances_) + np.log(self.weights_)
        return weighted - logsumexp(weighted, axis=1)[:, None]


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ center selection."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    if k == 1:
        return centers
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(closest.sum())
        if total <= 0.0:
            # All remaining points coincide with a chosen center.
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r))
            idx = min(idx, n - 1)
        centers[j] = X[idx]
        closest = np.minimum(closest, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _kmeans_init(
    X: np.ndarray, k: int, rng: np.random.Generator, lloyd_iters: int = 10
) -> tuple[np.ndarray, np.ndarray]:
    """k-means++ seeding refined by a few Lloyd iterations.

    Raw k-means++ picks are single data points; in high dimensions seeding EM
    from them commits to arbitrary splits. A short k-means run moves the
    centers onto the dominant cluster structure first.
    """
    centers = _kmeanspp(X, k, rng)
    nearest = np.argmin(((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1)
    for _ in range(lloyd_iters):
        updated = centers.copy()
        for j in range(k):
            members = X[nearest == j]
            if len(members):
                updated[j] = members.mean(axis=0)
        reassigned = np.argmin(
            ((X[:, None, :] - updated[None, :, :]) ** 2).sum(axis=2), axis=1
        )
        centers = updated
        if np.array_equal(reassigned, nearest):
            nearest = reassigned
            break
        nearest = reassigned
    return centers, nearest


class GibbsLDA(BaseEstimator):
    """Latent topic model fit by collapsed Gibbs sampling.

    Documents are bags of feature counts (:class:`SparseCounts`). Priors
    default to ``alpha = beta = 1/k``. Every document is labeled with its
    argmax topic under the final assignment counts; documents with zero
    in-vocabulary tokens get a seeded uniform-random topic and are flagged
    in ``degenerate_docs_``.

    ``sweep_totals_`` records the total topic-word count after every sweep;
    it must stay equal to the corpus token count (conservation).
    """

    def __init__(self, n_topics=1, alpha=None, beta=None, sweeps=200, seed=0):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta = beta
        self.sweeps = sweeps
        self.seed = seed

    def fit(self, docs: Sequence[SparseCounts], n_features: int | None = None):
        k = self.n_topics
        if k < 1:
            raise DataError(f"n_topics must be >= 1, got {k}")
        if not docs:
            raise DataError("cannot fit a topic model on zero documents")
        max_col = -1
        for doc in docs:
            if doc.entries:
                max_col = max(max_col, doc.entries[-1][0])
        if n_features is None:
            if max_col < 0:
                raise DataError("all documents are empty; vocabulary size unknown")
            n_features = max_col + 1
        elif max_col >= n_features:
            raise DataError(f"column {max_col} exceeds n_features={n_features}")

        alpha = self.alpha if self.alpha is not None else 1.0 / k
        beta = self.beta if self.beta is not None else 1.0 / k
        rng = np.random.default_rng(self.seed)

        tokens: list[list[int]] = []
        for doc in docs:
            words: list[int] = []
            for col, count in doc.entries:
                words.extend([col] * count)
            tokens.append(words)

        n_docs = len(docs)
        n_dk = [[0] * k for _ in range(n_docs)]
        n_kw = [[0] * n_features for _ in range(k)]
        n_k = [0] * k
        assignments: list[list[int]] = []
        degenerate: list[int] = []
        random_labels: dict[int, int] = {}
        for d, words in enumerate(tokens):
            if not words:
                degenerate.append(d)
                random_labels[d] = int(rng.integers(k))
                assignments.append([])
                continue
            z = rng.integers(0, k, size=len(words))
            assignments.append([int(t) for t in z])
            row = n_dk[d]
            for w, t in zip(words, assignments[d]):
                row[t] += 1
                n_kw[t][w] += 1
                n_k[t] += 1

        total_tokens = sum(n_k)
        v_beta = n_features * beta
        sweep_totals: list[int] = []
        for _ in range(self.sweeps):
            if k == 1:
                # Single topic: every assignment is forced, nothing to sample.
                sweep_totals.append(total_tokens)
                continue
            for d, words in enumerate(tokens):
                if not words:
                    continue
                z = assignments[d]
                row = n_dk[d]
                for pos, w in enumerate(words):
                    t_old = z[pos]
                    row[t_old] -= 1
                    n_kw[t_old][w] -= 1
                    n_k[t_old] -= 1
                    cum = 0.0
                    weights = [0.0] * k
                    for t in range(k):
                        cum += (row[t] + alpha) * (n_kw[t][w] + beta) / (n_k[t] + v_beta)
                        weights[t] = cum
                    u = rng.random() * cum
                    t_new = 0
                    while weights[t_new] < u:
                        t_new += 1
                    z[pos] = t_new
                    row[t_new] += 1
                    n_kw[t_new][w] += 1
                    n_k[t_new] += 1
            sweep_totals.append(sum(n_k))

        self.alpha_ = alpha
        self.beta_ = beta
        self.n_features_ = n_features
        self.topic_word_ = np.array(n_kw, dtype=np.int64)
        self.doc_topic_ = np.array(n_dk, dtype=np.int64)
        self.sweep_totals_ = sweep_totals
        self.total_tokens_ = total_tokens
        self.degenerate_docs_ = degenerate
        labels = np.argmax(self.doc_topic_, axis=1)
        for d, label in random_labels.items():
            labels[d] = label
        self.labels_ = labels
        return self


@dataclass
class ClusterAssignment:
    """Sentence-to-cluster labels for one treebank plus embedding-space means."""

    treebank_code: str
    method: str
    n_clusters: int
    labels: dict[str, int]
    cluster_means: np.ndarray
    empty_clusters: tuple[int, ...] = ()

    def members(self, cluster: int) -> list[str]:
        return [gid for gid, c in self.labels.items() if c == cluster]


def cluster_treebank(
    tb: Treebank,
    meta: TreebankMeta,
    method: str,
    embeddings: EmbeddingMatrix,
    seed: int,
    gmm_params: Mapping | None = None,
    lda_params: Mapping | None = None,
) -> ClusterAssignment:
    """Cluster one treebank into k = |metadata genres| clusters.

    ``gmm`` fits the mixture on the treebank's embedding rows; ``lda`` fits
    topics on per-treebank character n-gram bags. Cluster means are computed
    from member embeddings either way. Treebanks smaller than k degenerate
    to one sentence per cluster with a warning.
    """
    if method not in ("gmm", "lda"):
        raise DataError(f"unknown clustering method {method!r}")
    k = len(meta.genres)
    sentences = list(tb.sentences())
    if not sentences:
        raise DataError(f"{tb.code}: treebank has no sentences")
    ids = [s.global_id for s in sentences]
    n = len(ids)

    if n < k:
        warnings.warn(
            f"{tb.code}: {n} sentences for {k} genres; assigning one sentence per cluster"
        )
        labels = {gid: i for i, gid in enumerate(ids)}
    elif method == "gmm":
        model = GaussianMixtureEM(n_components=k, seed=seed, **dict(gmm_params or {}))
        X = embeddings.rows[embeddings.positions(ids)].astype(np.float64)
        model.fit(X)
        labels = {gid: int(c) for gid, c in zip(ids, model.predict(X))}
    else:
        vocab = build_vocab(s.text for s in sentences)
        docs = [vectorize(s.text, vocab, doc_id=s.global_id) for s in sentences]
        model = GibbsLDA(n_topics=k, seed=seed, **dict(lda_params or {}))
        model.fit(docs, n_features=len(vocab))
        labels = {gid: int(c) for gid, c in zip(ids, model.labels_)}

    means = np.full((k, embeddings.dim), np.nan, dtype=np.float64)
    empty: list[int] = []
    for cluster in range(k):
        member_ids = [gid for gid, c in labels.items() if c == cluster]
        if member_ids:
            means[cluster] = mean_embedding(embeddings, member_ids)
        else:
            empty.append(cluster)
    return ClusterAssignment(
        treebank_code=tb.code,
        method=method,
        n_clusters=k,
        labels=labels,
        cluster_means=means,
        empty_clusters=tuple(empty),
    )


def write_assignment(
    assignment: ClusterAssignment,
    tsv_path: str | Path,
    means_path: str | Path | None = None,
    config_hash: str = "",
) -> None:
    with open(tsv_path, "w", encoding="utf-8") as handle:
        if config_hash:
            handle.write(f"# config-hash: {config_hash}\n")
        handle.write(f"# treebank: {assignment.treebank_code}\n")
        handle.write(f"# clusters: {assignment.n_clusters}\n")
        handle.write("global_id\tmethod\tcluster\n")
        for gid, cluster in assignment.labels.items():
            handle.write(f"{gid}\t{assignment.method}\t{cluster}\n")
    if means_path is not None:
        occupied = [c for c in range(assignment.n_clusters) if c not in assignment.empty_clusters]
        matrix = EmbeddingMatrix(
            ids=[f"cluster-{c}" for c in occupied],
            rows=assignment.cluster_means[occupied].astype(np.float32),
        )
        save_embeddings(matrix, means_path)


def read_assignment(tsv_path: str | Path, means_path: str | Path | None = None) -> ClusterAssignment:
    code = ""
    k = -1
    method = ""
    labels: dict[str, int] = {}
    with open(tsv_path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if line.startswith("# treebank:"):
                code = line.split(":", 1)[1].strip()
                continue
            if line.startswith("# clusters:"):
                k = int(line.split(":", 1)[1].strip())
                continue
            if line.startswith("#") or not line or line.startswith("global_id\t"):
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise FormatError(f"{tsv_path}: bad assignment row {line!r}")
            labels[cols[0]] = int(cols[2])
            method = cols[1]
    if not labels or k < 1 or not code:
        raise FormatError(f"{tsv_path}: incomplete assignment dump")

    means = np.full((k, 0), np.nan)
    empty: tuple[int, ...] = ()
    if means_path is not None:
        stored = load_embeddings(means_path)
        means = np.full((k, stored.dim), np.nan, dtype=np.float64)
        occupied = set()
        for gid in stored.ids:
            cluster = int(gid.split("-", 1)[1])
            means[cluster] = stored.row(gid).astype(np.float64)
            occupied.add(cluster)
        empty = tuple(c for c in range(k) if c not in occupied)
    return ClusterAssignment(
        treebank_code=code,
        method=method,
        n_clusters=k,
        labels=labels,
        cluster_means=means,
        empty_clusters=empty,
    )
