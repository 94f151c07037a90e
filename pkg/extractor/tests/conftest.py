"""Fixtures: a 50-sentence corpus and a local 768-dim encoder checkpoint.

No model hub is reachable from the test environment, so the checkpoint is a
randomly initialized bert-architecture encoder with the contract-relevant
property (hidden size 768) and a character-level WordPiece vocabulary.
"""

from __future__ import annotations

import random
import string
from pathlib import Path

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast


def _vocab_lines() -> list[str]:
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    chars = list(string.ascii_lowercase) + list(string.digits)
    return specials + chars + [f"##{c}" for c in chars]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> Path:
    directory = tmp_path_factory.mktemp("tinybert")
    vocab_file = directory / "vocab.txt"
    vocab_file.write_text("\n".join(_vocab_lines()) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    tokenizer.save_pretrained(directory)
    config = BertConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=768,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=256,
        max_position_embeddings=256,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.save_pretrained(directory)
    return directory


def _sentence_block(sent_id: str, words: list[str]) -> str:
    lines = [f"# sent_id = {sent_id}", f"# text = {' '.join(words)}"]
    for i, form in enumerate(words, start=1):
        head = 0 if i == 1 else i - 1
        deprel = "root" if i == 1 else "dep"
        lines.append(f"{i}\t{form}\t{form}\t_\t_\t_\t{head}\t{deprel}\t_\t_")
    return "\n".join(lines)


def write_corpus(root: Path, plan: dict[str, dict[str, int]], seed: int = 3) -> list[str]:
    """Build treebank dirs; returns the expected canonical global_id order."""
    rng = random.Random(seed)
    expected: list[str] = []
    for code in sorted(plan):
        directory = root / code
        directory.mkdir(parents=True, exist_ok=True)
        for split in ("train", "dev", "test"):
            count = plan[code].get(split, 0)
            if not count:
                continue
            blocks = []
            for i in range(1, count + 1):
                words = [
                    "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(3, 7)))
                    for _ in range(rng.randint(4, 9))
                ]
                blocks.append(_sentence_block(f"s{i}", words))
                expected.append(f"{code}/{split}/s{i}")
            (directory / f"{split}.conllu").write_text(
                "\n\n".join(blocks) + "\n", encoding="utf-8"
            )
    return expected


@pytest.fixture(scope="session")
def fifty_sentence_corpus(tmp_path_factory) -> tuple[Path, list[str]]:
    root = tmp_path_factory.mktemp("xcorpus")
    expected = write_corpus(
        root, {"UD_Alpha-A": {"train": 20, "test": 10}, "UD_Beta-B": {"train": 20}}
    )
    assert len(expected) == 50
    return root, expected
