"""Batched sentence-embedding extraction with mask-aware mean pooling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .conllu import iter_corpus
from .gsem import write_gsem

DEFAULT_MODEL = "bert-base-multilingual-cased"


@dataclass
class ExtractorConfig:
    corpus_root: str
    output_path: str
    model: str = DEFAULT_MODEL
    batch_size: int = 16
    max_length: int = 128
    device: str = "cpu"
    include_special_tokens: bool = True


def mean_pool(
    hidden: torch.Tensor, attention_mask: torch.Tensor, special_mask: torch.Tensor | None = None
) -> torch.Tensor:
    """Mean of the final-layer vectors over real tokens.

    Padding positions never contribute; special tokens are included unless a
    ``special_mask`` is given. Correct masking is what keeps rows independent
    of batch composition.
    """
    mask = attention_mask
    if special_mask is not None:
        mask = mask * (1 - special_mask)
    mask = mask.unsqueeze(-1).to(hidden.dtype)
    summed = (hidden * mask).sum(dim=1)
    counts = mask.sum(dim=1).clamp(min=1.0)
    return summed / counts


def extract(config: ExtractorConfig) -> tuple[int, int]:
    """Embed every corpus sentence; returns (row count, dimension).

    Row order equals corpus iteration order; over-long sentences are
    truncated (with a warning), never dropped.
    """
    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModel.from_pretrained(config.model)
    model.to(config.device)
    model.eval()
    dim = int(model.config.hidden_size)

    ids: list[str] = []
    rows: list[np.ndarray] = []
    batch_ids: list[str] = []
    batch_texts: list[str] = []

    def run_batch() -> None:
        if not batch_texts:
            return
        lengths = [
            len(encoded)
            for encoded in tokenizer(batch_texts, truncation=False, padding=False)["input_ids"]
        ]
        for gid, length in zip(batch_ids, lengths):
            if length > config.max_length:
                warnings.warn(
                    f"{gid}: {length} tokens exceed max_length={config.max_length}; truncated"
                )
        encoded = tokenizer(
            batch_texts,
            truncation=True,
            max_length=config.max_length,
            padding=True,
            return_tensors="pt",
            return_special_tokens_mask=not config.include_special_tokens,
        )
        special = encoded.pop("special_tokens_mask", None)
        encoded = {k: v.to(config.device) for k, v in encoded.items()}
        with torch.no_grad():
            hidden = model(**encoded).last_hidden_state
        pooled = mean_pool(
            hidden,
            encoded["attention_mask"],
            special.to(config.device) if special is not None else None,
        )
        rows.append(pooled.cpu().to(torch.float32).numpy())
        ids.extend(batch_ids)
        batch_ids.clear()
        batch_texts.clear()

    for sentence in iter_corpus(config.corpus_root):
        batch_ids.append(sentence.global_id)
        batch_texts.append(sentence.text)
        if len(batch_ids) >= config.batch_size:
            run_batch()
    run_batch()

    matrix = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    Path(config.output_path).parent.mkdir(parents=True, exist_ok=True)
    write_gsem(config.output_path, ids, matrix)
    return len(ids), dim
