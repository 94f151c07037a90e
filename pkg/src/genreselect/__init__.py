"""Genre-driven, instance-level training-data selection for treebank collections."""

from .analysis import (
    AttachmentScore,
    GenreBounds,
    SignificanceResult,
    aggregate_seeds,
    bonferroni,
    genre_bounds,
    las_uas,
    paired_sign_test,
    selection_matrix,
)
from .bootstrap import (
    BootState,
    GenreSoftmaxClassifier,
    bootstrap_labels,
    init_seed_set,
    predict_genre,
    train_classifier,
)
from .cluster import ClusterAssignment, GaussianMixtureEM, GibbsLDA, cluster_treebank
from .corpus import (
    Corpus,
    DEFAULT_EXCLUSIONS,
    Sentence,
    Token,
    Treebank,
    TreebankMeta,
    UD_GENRES,
    load_corpus,
    load_registry,
    parse_conllu,
    split_train_dev,
    subsample_corpus,
    subsample_treebank,
    write_conllu,
)
from .embed import (
    EmbeddingMatrix,
    cosine_distance,
    fallback_featurize,
    load_embeddings,
    mean_embedding,
    save_embeddings,
)
from .errors import ConfigError, DataError, FormatError, GenreSelectError, MissingArtifactError
from .ngrams import CharNgramVectorizer, NgramVocab, SparseCounts, build_vocab, extract_ngrams, vectorize
from .select import (
    SelectionManifest,
    TargetSpec,
    exclusion_pool,
    read_manifest,
    sample_target,
    select_boot,
    select_cluster,
    select_meta,
    select_rand,
    select_sent,
    select_target,
    write_manifest,
)

__version__ = "0.1.0"
