"""The six training-data selection strategies and manifest emission.

Every strategy is a pure function of (corpus view, embeddings/labels,
seed) returning a :class:`SelectionManifest`: an ordered, reproducible
list of global sentence ids with per-treebank provenance counts. Target
and constituent languages are always excluded from the candidate pool.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cluster import ClusterAssignment
from .corpus import Corpus, Treebank, TreebankMeta, seeded_permutation
from .embed import EmbeddingMatrix, cosine_distance, cosine_distances
from .errors import DataError, FormatError

STRATEGIES = ("rand", "sent", "meta", "boot", "gmm", "lda", "target")

# Constituent languages of code-switched targets, keyed by the registry's
# language identifier. Both sides of the mixture leave the pool.
CODE_SWITCH_CONSTITUENTS = {
    "hindi-english": ("hindi", "english"),
    "turkish-german": ("turkish", "german"),
}

# In-language proxy treebanks for targets without a training split.
DEFAULT_PROXIES = {
    "UD_Sanskrit-UFAL": "UD_Sanskrit-Vedic",
    "UD_Komi_Zyrian-Lattice": "UD_Komi_Zyrian-IKDP",
    "UD_Faroese-OFT": "UD_Faroese-FarPaHC",
}


@dataclass(frozen=True)
class TargetSpec:
    """A target treebank, its genre and the languages to exclude."""

    treebank_code: str
    genre: str
    languages: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.languages:
            raise DataError(f"{self.treebank_code}: empty exclusion language set")

    @classmethod
    def from_registry(
        cls,
        code: str,
        registry: Mapping[str, TreebankMeta],
        genre: str | None = None,
    ) -> "TargetSpec":
        if code not in registry:
            raise DataError(f"target treebank {code} not in registry")
        meta = registry[code]
        if genre is None:
            if not meta.is_single_genre:
                raise DataError(
                    f"{code} lists several genres {sorted(meta.genres)}; pass one explicitly"
                )
            genre = next(iter(meta.genres))
        if genre not in meta.genres:
            raise DataError(f"{code}: genre {genre!r} not in metadata genres {sorted(meta.genres)}")
        language = meta.language.lower()
        constituents = CODE_SWITCH_CONSTITUENTS.get(language, ())
        return cls(treebank_code=code, genre=genre, languages=(language, *constituents))


@dataclass
class SelectionManifest:
    strategy: str
    target: TargetSpec
    seed: int
    ids: tuple[str, ...]
    treebank_counts: dict[str, int] = field(default_factory=dict)
    config_hash: str = ""

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise DataError(f"unknown strategy {self.strategy!r}")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("manifest contains duplicate ids")
        if not self.treebank_counts:
            counts: dict[str, int] = {}
            for gid in self.ids:
                code = gid.split("/", 1)[0]
                counts[code] = counts.get(code, 0) + 1
            self.treebank_counts = counts
        if sum(self.treebank_counts.values()) != len(self.ids):
            raise DataError("treebank counts do not sum to the manifest size")

    def __len__(self) -> int:
        return len(self.ids)


def exclusion_pool(corpus: Corpus, target: TargetSpec) -> Corpus:
    """Remove every treebank in the target or constituent languages."""
    excluded_langs = {lang.lower() for lang in target.languages}
    keep = [
        code for code in corpus.codes() if corpus.meta[code].language.lower() not in excluded_langs
    ]
    if not keep:
        raise DataError(f"empty selection pool after excluding languages {sorted(excluded_langs)}")
    return corpus.restrict(keep)


def sample_target(target_tb: Treebank, n: int = 100, seed: int = 0) -> list[str]:
    """Seeded uniform sample (without replacement) of target sentence ids."""
    ids = [s.global_id for s in target_tb.sentences()]
    if not ids:
        raise DataError(f"{target_tb.code}: target treebank has no sentences")
    perm = seeded_permutation(len(ids), f"{seed}:target-sample:{target_tb.code}")
    return [ids[i] for i in perm[: min(n, len(ids))]]


def select_meta(
    pool: Corpus, target: TargetSpec, seed: int = 0, config_hash: str = ""
) -> SelectionManifest:
    """Everything from every pool treebank whose metadata lists the genre."""
    ids: list[str] = []
    matched = False
    for code in pool.codes():
        if target.genre in pool.meta[code].genres:
            matched = True
            ids.extend(s.global_id for s in pool.treebanks[code].sentences())
    if not matched:
        raise DataError(f"no pool treebank lists genre {target.genre!r}")
    return SelectionManifest("meta", target, seed, tuple(ids), config_hash=config_hash)


def select_sent(
    pool_embeddings: EmbeddingMatrix,
    target_mean: np.ndarray,
    k: int,
    target: TargetSpec,
    seed: int = 0,
    config_hash: str = "",
) -> SelectionManifest:
    """Top-k pool sentences by cosine distance to the target mean embedding.

    Genre metadata is ignored. Ties break lexicographically on global_id;
    the selected set is invariant to positive uniform scaling of the
    embeddings.
    """
    n = len(pool_embeddings)
    if k < 1 or k > n:
        raise DataError(f"k must be in 1..{n}, got {k}")
    distances = cosine_distances(pool_embeddings.rows, target_mean)
    ranked = sorted(zip(distances, pool_embeddings.ids))
    ids = tuple(gid for _, gid in ranked[:k])
    return SelectionManifest("sent", target, seed, ids, config_hash=config_hash)


def select_boot(
    labels: Mapping[str, str],
    pool: Corpus,
    target: TargetSpec,
    seed: int = 0,
    config_hash: str = "",
) -> SelectionManifest:
    """All pool sentences whose bootstrap label equals the target genre."""
    ids = [
        s.global_id
        for s in pool.sentences()
        if labels.get(s.global_id) == target.genre
    ]
    if not ids:
        raise DataError(f"bootstrap labeled no pool sentence as {target.genre!r}")
    return SelectionManifest("boot", target, seed, tuple(ids), config_hash=config_hash)


def select_cluster(
    assignments: Sequence[ClusterAssignment],
    pool: Corpus,
    target: TargetSpec,
    target_mean: np.ndarray,
    seed: int = 0,
    config_hash: str = "",
) -> SelectionManifest:
    """Per in-genre treebank, the members of the cluster closest to the target.

    ``assignments`` must cover exactly the pool treebanks whose metadata
    includes the target genre. Empty clusters are skipped; distance ties go
    to the lowest cluster index.
    """
    expected = {code for code in pool.codes() if target.genre in pool.meta[code].genres}
    if not expected:
        raise DataError(f"no pool treebank lists genre {target.genre!r}")
    provided = {a.treebank_code for a in assignments}
    if provided != expected:
        missing = sorted(expected - provided)
        extra = sorted(provided - expected)
        raise DataError(
            f"cluster assignments do not match the in-genre pool "
            f"(missing {missing}, unexpected {extra})"
        )
    method = {a.method for a in assignments}
    if len(method) > 1:
        raise DataError(f"mixed clustering methods in one selection: {sorted(method)}")

    by_code = {a.treebank_code: a for a in assignments}
    ids: list[str] = []
    for code in sorted(by_code):
        assignment = by_code[code]
        best_cluster = -1
        best_distance = np.inf
        for cluster in range(assignment.n_clusters):
            if cluster in assignment.empty_clusters:
                continue
            distance = cosine_distance(assignment.cluster_means[cluster], target_mean)
            if distance < best_distance:
                best_distance = distance
                best_cluster = cluster
        if best_cluster < 0:
            warnings.warn(f"{code}: all clusters empty; treebank skipped")
            continue
        chosen = {gid for gid, c in assignment.labels.items() if c == best_cluster}
        ids.extend(
            s.global_id for s in pool.treebanks[code].sentences() if s.global_id in chosen
        )
    strategy = next(iter(method))
    return SelectionManifest(strategy, target, seed, tuple(ids), config_hash=config_hash)


def rand_size(boot_n: int, gmm_n: int, lda_n: int) -> int:
    """Size of the random baseline: round-half-even mean of the three counts."""
    return round((boot_n + gmm_n + lda_n) / 3)


def select_rand(
    pool: Corpus,
    boot_n: int,
    gmm_n: int,
    lda_n: int,
    target: TargetSpec,
    seed: int = 0,
    config_hash: str = "",
) -> SelectionManifest:
    """Seeded uniform sample from the whole pool (not restricted by genre)."""
    n_rand = rand_size(boot_n, gmm_n, lda_n)
    pool_ids = pool.ids()
    if n_rand > len(pool_ids):
        warnings.warn(f"n_rand={n_rand} exceeds pool size {len(pool_ids)}; clamping")
        n_rand = len(pool_ids)
    perm = seeded_permutation(len(pool_ids), f"{seed}:rand-select")
    keep = sorted(perm[:n_rand])
    ids = tuple(pool_ids[i] for i in keep)
    return SelectionManifest("rand", target, seed, ids, config_hash=config_hash)


def select_target(
    corpus: Corpus,
    target: TargetSpec,
    proxies: Mapping[str, str] | None = None,
    seed: int = 0,
    config_hash: str = "",
) -> SelectionManifest:
    """The in-language upper bound: the target (or proxy) training split."""
    proxies = DEFAULT_PROXIES if proxies is None else proxies
    code = target.treebank_code
    tb = corpus.treebanks.get(code)
    if tb is None or "train" not in tb.splits:
        proxy = proxies.get(code)
        if proxy is None:
            raise DataError(f"{code}: no in-language upper bound (no train split, no proxy)")
        tb = corpus.treebanks.get(proxy)
        if tb is None or "train" not in tb.splits:
            raise DataError(f"{code}: proxy {proxy} has no train split in the corpus")
    ids = tuple(s.global_id for s in tb.splits["train"])
    return SelectionManifest("target", target, seed, ids, config_hash=config_hash)


def write_manifest(manifest: SelectionManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"#strategy {manifest.strategy}\n")
        handle.write(
            f"#target {manifest.target.treebank_code} {manifest.target.genre} "
            f"{','.join(manifest.target.languages)}\n"
        )
        handle.write(f"#seed {manifest.seed}\n")
        handle.write(f"#config-hash {manifest.config_hash}\n")
        for gid in manifest.ids:
            handle.write(gid + "\n")


def read_manifest(path: str | Path) -> SelectionManifest:
    strategy = ""
    seed = 0
    config_hash = ""
    target: TargetSpec | None = None
    ids: list[str] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#strategy "):
                strategy = line.split(" ", 1)[1]
            elif line.startswith("#target "):
                parts = line.split(" ")
                if len(parts) != 4:
                    raise FormatError(f"{path}: malformed target header {line!r}")
                target = TargetSpec(parts[1], parts[2], tuple(parts[3].split(",")))
            elif line.startswith("#seed "):
                seed = int(line.split(" ", 1)[1])
            elif line.startswith("#config-hash"):
                parts = line.split(" ", 1)
                config_hash = parts[1] if len(parts) > 1 else ""
            elif line.startswith("#"):
                continue
            else:
                ids.append(line)
    if not strategy or target is None:
        raise FormatError(f"{path}: missing manifest headers")
    return SelectionManifest(strategy, target, seed, tuple(ids), config_hash=config_hash)
