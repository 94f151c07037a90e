"""Shared fixture builders: synthetic treebanks with genre-distinct texts.

Each genre draws words from a disjoint character alphabet, so character
n-grams (and therefore fallback embeddings and topic models) separate the
genres cleanly. Builders are deterministic given their seed.
"""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from genreselect.corpus import Corpus, Sentence, Token, TreebankMeta, load_corpus, write_registry

GENRE_ALPHABETS = {
    "news": "abcd",
    "spoken": "efgh",
    "fiction": "ijkl",
    "wiki": "mnop",
    "social": "qrst",
    "grammar-examples": "uvwx",
    "legal": "yzæø",
    "poetry": "åðþγ",
}

DEPRELS = ("nsubj", "obj", "nmod", "advmod", "amod", "obl")


def genre_word(genre: str, rng: random.Random) -> str:
    alphabet = GENRE_ALPHABETS[genre]
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(4, 7)))


def genre_inventory(genre: str, size: int, seed: int) -> list[str]:
    rng = random.Random(f"inventory:{genre}:{seed}")
    words = set()
    while len(words) < size:
        words.add(genre_word(genre, rng))
    return sorted(words)


def make_sentence(global_id: str, sent_id: str, words: list[str]) -> Sentence:
    rows = []
    for i, form in enumerate(words, start=1):
        head = 0 if i == 1 else i - 1
        deprel = "root" if i == 1 else DEPRELS[(i - 2) % len(DEPRELS)]
        rows.append(
            Token(
                index=i, form=form, lemma=form, upos="X", xpos="_", feats="_",
                head=head, deprel=deprel, deps="_", misc="_",
            )
        )
    text = " ".join(words)
    return Sentence(
        global_id=global_id,
        sent_id=sent_id,
        comments=[f"# sent_id = {sent_id}", f"# text = {text}"],
        rows=rows,
        _text=text,
    )


def genre_sentences(
    treebank: str, split: str, genre: str, count: int, seed: int, start: int = 1
) -> list[Sentence]:
    # Inventory size / sentence length balance: within-genre sentences must
    # share enough words to cluster together, while keeping word document
    # frequencies under the 30% vocabulary ceiling.
    rng = random.Random(f"{treebank}:{split}:{genre}:{seed}")
    inventory = genre_inventory(genre, 20, seed)
    sentences = []
    for i in range(start, start + count):
        words = [rng.choice(inventory) for _ in range(rng.randint(8, 12))]
        sid = f"s{i}"
        sentences.append(make_sentence(f"{treebank}/{split}/{sid}", sid, words))
    return sentences


def write_treebank_dir(
    root: Path, code: str, plan: dict[str, list[tuple[str, int]]], seed: int
) -> dict[str, str]:
    """Write .conllu files for one treebank; returns {global_id: genre}."""
    directory = root / code
    directory.mkdir(parents=True, exist_ok=True)
    plant: dict[str, str] = {}
    for split, sections in plan.items():
        blocks = []
        index = 1
        for genre, count in sections:
            sentences = genre_sentences(code, split, genre, count, seed, start=index)
            index += count
            for sentence in sentences:
                plant[sentence.global_id] = genre
                lines = list(sentence.comments)
                for token in sentence.rows:
                    lines.append("\t".join(token.columns()))
                blocks.append("\n".join(lines))
        (directory / f"{split}.conllu").write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
    return plant


def build_fixture_corpus(
    root: Path,
    spec: dict[str, tuple[str, frozenset[str], dict[str, list[tuple[str, int]]]]],
    seed: int = 11,
) -> tuple[Path, Path, dict[str, str]]:
    """Build a corpus tree plus registry from {code: (language, genres, plan)}."""
    corpus_dir = root / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    registry = {}
    plant: dict[str, str] = {}
    for code, (language, genres, plan) in spec.items():
        plant.update(write_treebank_dir(corpus_dir, code, plan, seed))
        splits = {split: sum(c for _, c in sections) for split, sections in plan.items()}
        registry[code] = TreebankMeta(
            code=code, language=language, genres=frozenset(genres), splits=splits
        )
    registry_path = root / "registry.tsv"
    write_registry(registry, registry_path)
    return corpus_dir, registry_path, plant


BOOT_SPEC = {
    "UD_Newsland-One": ("newsian", frozenset({"news"}), {"train": [("news", 60)]}),
    "UD_Spokia-One": ("spokian", frozenset({"spoken"}), {"train": [("spoken", 60)]}),
    "UD_Mixia-NF": (
        "mixian",
        frozenset({"news", "fiction"}),
        {"train": [("news", 40), ("fiction", 40)]},
    ),
    "UD_Mixwia-SW": (
        "mixwian",
        frozenset({"spoken", "wiki"}),
        {"train": [("spoken", 40), ("wiki", 40)]},
    ),
}

CLI_SPEC = {
    **BOOT_SPEC,
    "UD_Targetia-Test": (
        "targetian",
        frozenset({"spoken"}),
        {"train": [("spoken", 40)], "test": [("spoken", 200)]},
    ),
}


def load_fixture_corpus(root: Path, spec, seed: int = 11) -> tuple[Corpus, Path, dict[str, str]]:
    corpus_dir, registry_path, plant = build_fixture_corpus(root, spec, seed=seed)
    return load_corpus(corpus_dir, registry_path, exclusions=()), registry_path, plant


@pytest.fixture(scope="session")
def boot_fixture(tmp_path_factory) -> tuple[Corpus, dict[str, str]]:
    root = tmp_path_factory.mktemp("bootcorpus")
    corpus_dir, registry_path, plant = build_fixture_corpus(root, BOOT_SPEC)
    corpus = load_corpus(corpus_dir, registry_path, exclusions=())
    return corpus, plant


@pytest.fixture(scope="session")
def cli_fixture(tmp_path_factory) -> tuple[Path, Path, dict[str, str]]:
    root = tmp_path_factory.mktemp("clicorpus")
    corpus_dir, registry_path, plant = build_fixture_corpus(root, CLI_SPEC)
    return corpus_dir, registry_path, plant
