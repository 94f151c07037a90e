"""Softmax genre head and the iterative bootstrap labeling procedure."""

import math

import numpy as np
import pytest

from genreselect.bootstrap import (
    GENRE_INDEX,
    GenreSoftmaxClassifier,
    N_GENRES,
    bootstrap_labels,
    init_seed_set,
    predict_genre,
    read_labels,
    train_classifier,
    write_labels,
)
from genreselect.corpus import UD_GENRES, load_corpus
from genreselect.embed import fallback_featurize
from genreselect.errors import DataError, FormatError

from conftest import build_fixture_corpus


def separable_data(n_per: int = 60, dim: int = 16, seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.normal(loc=4.0, scale=0.5, size=(n_per, dim))
    b = rng.normal(loc=-4.0, scale=0.5, size=(n_per, dim))
    X = np.vstack([a, b])
    y = np.array([GENRE_INDEX["news"]] * n_per + [GENRE_INDEX["spoken"]] * n_per)
    return X, y


class TestClassifier:
    def test_separable_training_accuracy(self):
        X, y = separable_data()
        model = GenreSoftmaxClassifier(seed=41).fit(X, y)
        accuracy = float(np.mean(model.predict(X) == y))
        assert accuracy >= 0.99

    def test_fixed_seed_reproduces_weights(self):
        X, y = separable_data(seed=3)
        a = GenreSoftmaxClassifier(seed=41).fit(X, y)
        b = GenreSoftmaxClassifier(seed=41).fit(X, y)
        assert np.array_equal(a.coef_, b.coef_)
        assert np.array_equal(a.intercept_, b.intercept_)

    def test_conflicting_duplicates_hit_entropy_floor(self):
        # Same feature row under two labels: cross-entropy cannot beat ln 2.
        row = np.ones((1, 8))
        X = np.repeat(row, 40, axis=0)
        y = np.array([GENRE_INDEX["news"]] * 20 + [GENRE_INDEX["wiki"]] * 20)
        model = GenreSoftmaxClassifier(seed=41, max_epochs=50).fit(X, y)
        probs = model.predict_proba(X)
        loss = -np.mean(np.log(probs[np.arange(len(y)), y]))
        assert loss >= math.log(2.0) - 1e-9

    def test_single_genre_is_error(self):
        X = np.random.default_rng(0).normal(size=(10, 4))
        with pytest.raises(DataError, match="single genre"):
            GenreSoftmaxClassifier().fit(X, np.zeros(10, dtype=int))

    def test_nan_input_rejected(self):
        X, y = separable_data(n_per=10)
        model = GenreSoftmaxClassifier(seed=1).fit(X, y)
        bad = np.full((1, X.shape[1]), np.nan)
        with pytest.raises(DataError, match="NaN"):
            model.predict_proba(bad)

    def test_checkpoint_round_trip(self, tmp_path):
        X, y = separable_data(n_per=20)
        model = GenreSoftmaxClassifier(seed=41).fit(X, y)
        path = tmp_path / "classifier.bin"
        model.save(path)
        loaded = GenreSoftmaxClassifier.load(path)
        expected = model.coef_.astype(np.float32).astype(np.float64)
        assert np.array_equal(loaded.coef_, expected)
        probs_a = model.predict(X)
        probs_b = loaded.predict(X)
        assert np.array_equal(probs_a, probs_b)

    def test_truncated_checkpoint(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"\x04\x00\x00\x00\x12\x00\x00\x00abc")
        with pytest.raises(FormatError):
            GenreSoftmaxClassifier.load(path)


class TestPredictGenre:
    def _zero_model(self, dim=6):
        model = GenreSoftmaxClassifier()
        model.coef_ = np.zeros((dim, N_GENRES))
        model.intercept_ = np.zeros(N_GENRES)
        return model

    def test_zero_weights_uniform(self):
        model = self._zero_model()
        probs, genre, p = predict_genre(model, np.ones(6))
        assert np.allclose(probs, 1.0 / 18.0)
        assert p == pytest.approx(1.0 / 18.0)
        assert genre == UD_GENRES[0]

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(8)
        model = GenreSoftmaxClassifier()
        model.coef_ = rng.normal(size=(5, N_GENRES))
        model.intercept_ = rng.normal(size=N_GENRES)
        for _ in range(10):
            probs, _, _ = predict_genre(model, rng.normal(size=5))
            assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    def test_matches_hand_computed_softmax(self):
        model = GenreSoftmaxClassifier()
        model.coef_ = np.zeros((2, N_GENRES))
        model.coef_[0, 3] = 1.0
        model.coef_[1, 7] = 2.0
        model.intercept_ = np.zeros(N_GENRES)
        model.intercept_[0] = 0.5
        x = np.array([1.0, 1.5])
        logits = np.zeros(N_GENRES)
        logits[3] = 1.0
        logits[7] = 3.0
        logits[0] = 0.5
        expected = np.exp(logits) / np.exp(logits).sum()
        probs, genre, p = predict_genre(model, x)
        assert np.allclose(probs, expected, atol=1e-12)
        assert genre == UD_GENRES[7]
        assert p == pytest.approx(expected[7])


class TestInitSeedSet:
    def test_single_treebank_all_seed_labeled(self, tmp_path):
        spec = {"UD_Solo-X": ("soloan", frozenset({"news"}), {"train": [("news", 12)]})}
        corpus_dir, registry_path, _ = build_fixture_corpus(tmp_path, spec)
        corpus = load_corpus(corpus_dir, registry_path, exclusions=())
        state = init_seed_set(corpus)
        assert state.round == 0
        assert len(state.labeled) == 12
        assert not state.unlabeled
        assert all(rec.source == "seed" for rec in state.labeled.values())

    def test_multi_genre_treebank_unlabeled(self, boot_fixture):
        corpus, _ = boot_fixture
        state = init_seed_set(corpus)
        assert len(state.labeled) == 120
        assert len(state.unlabeled) == 160
        unlabeled_codes = {gid.split("/", 1)[0] for gid in state.unlabeled}
        assert unlabeled_codes == {"UD_Mixia-NF", "UD_Mixwia-SW"}

    def test_excluded_language_removed_entirely(self, boot_fixture):
        corpus, _ = boot_fixture
        state = init_seed_set(corpus, excluded_languages=("newsian",))
        assert "UD_Newsland-One" not in state.pool_codes
        assert not any(gid.startswith("UD_Newsland-One/") for gid in state.labeled)

    def test_no_seed_treebank_is_error(self, tmp_path):
        spec = {
            "UD_Mix-X": (
                "mixan",
                frozenset({"news", "wiki"}),
                {"train": [("news", 4), ("wiki", 4)]},
            )
        }
        corpus_dir, registry_path, _ = build_fixture_corpus(tmp_path, spec)
        corpus = load_corpus(corpus_dir, registry_path, exclusions=())
        with pytest.raises(DataError, match="no supervision seed"):
            init_seed_set(corpus)


@pytest.fixture(scope="module")
def boot_run(boot_fixture):
    corpus, plant = boot_fixture
    embeddings = fallback_featurize(corpus.sentences(), dim=128, seed=5)
    state = bootstrap_labels(corpus, embeddings, seed=41)
    return corpus, plant, embeddings, state


class TestBootstrapLabels:
    def test_terminates_with_full_coverage(self, boot_run):
        _, _, _, state = boot_run
        assert not state.unlabeled
        assert state.round <= 3
        assert state.fallback_count == 0

    def test_labels_match_plant(self, boot_run):
        _, plant, _, state = boot_run
        correct = sum(1 for gid, rec in state.labeled.items() if rec.genre == plant[gid])
        assert correct / len(state.labeled) >= 0.95

    def test_every_label_in_treebank_metadata(self, boot_run):
        corpus, _, _, state = boot_run
        for gid, record in state.labeled.items():
            code = gid.split("/", 1)[0]
            assert record.genre in corpus.meta[code].genres

    def test_last_remaining_rule_covers_unseeded_genres(self, boot_run):
        _, plant, _, state = boot_run
        # fiction and wiki have no single-genre treebank: only reachable by
        # elimination.
        sources = {
            state.labeled[gid].source for gid, genre in plant.items() if genre in ("fiction", "wiki")
        }
        assert sources == {"last-remaining"}

    def test_rerun_reproduces_labels(self, boot_run):
        corpus, _, embeddings, state = boot_run
        again = bootstrap_labels(corpus, embeddings, seed=41)
        assert again.labeled == state.labeled

    def test_threshold_one_blocks_threshold_labels(self, boot_run):
        corpus, _, embeddings, _ = boot_run
        state = bootstrap_labels(corpus, embeddings, threshold=1.0, seed=41)
        assert not state.unlabeled
        sources = {rec.source for rec in state.labeled.values()}
        assert "threshold" not in sources

    def test_two_genre_elimination_without_confident_model(self, tmp_path):
        # One seeded genre per mixture: leftovers must become the other genre.
        spec = {
            "UD_SeedA-X": ("alang", frozenset({"news"}), {"train": [("news", 40)]}),
            "UD_SeedB-X": ("blang", frozenset({"spoken"}), {"train": [("spoken", 40)]}),
            "UD_Mix-X": (
                "mlang",
                frozenset({"news", "legal"}),
                {"train": [("news", 20), ("legal", 20)]},
            ),
        }
        corpus_dir, registry_path, plant = build_fixture_corpus(tmp_path, spec)
        corpus = load_corpus(corpus_dir, registry_path, exclusions=())
        embeddings = fallback_featurize(corpus.sentences(), dim=64, seed=6)
        state = bootstrap_labels(corpus, embeddings, seed=41)
        legal_ids = [gid for gid, genre in plant.items() if genre == "legal"]
        assert all(state.labeled[gid].genre == "legal" for gid in legal_ids)
        assert all(state.labeled[gid].source == "last-remaining" for gid in legal_ids)

    def test_train_cap_subsamples(self, boot_run):
        corpus, _, embeddings, _ = boot_run
        state = init_seed_set(corpus)
        model = train_classifier(state, embeddings, train_cap=50, seed=41)
        assert model.coef_.shape == (128, N_GENRES)


class TestLabelIO:
    def test_round_trip(self, boot_run, tmp_path):
        _, _, _, state = boot_run
        path = tmp_path / "labels.tsv"
        write_labels(state, path, config_hash="beef")
        loaded = read_labels(path)
        assert set(loaded) == set(state.labeled)
        for gid, record in loaded.items():
            assert record.genre == state.labeled[gid].genre
            assert record.source == state.labeled[gid].source
            assert record.confidence == pytest.approx(state.labeled[gid].confidence, abs=1e-6)

    def test_bad_genre_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("a/train/s1\tnewsish\tseed\t1.0\n", encoding="utf-8")
        with pytest.raises(FormatError, match="unknown genre"):
            read_labels(path)
