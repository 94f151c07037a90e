"""Sentence-embedding extraction into the GSEM binary container."""

from .conllu import SentenceText, iter_corpus, read_sentences
from .extract import DEFAULT_MODEL, ExtractorConfig, extract, mean_pool
from .gsem import write_gsem

__version__ = "0.1.0"
