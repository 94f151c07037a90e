"""gsem-extract: embed a treebank collection into a GSEM file."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .extract import DEFAULT_MODEL, ExtractorConfig, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsem-extract",
        description="Mean-pooled final-layer sentence embeddings for a treebank corpus",
    )
    parser.add_argument("--corpus", required=True, help="corpus root directory")
    parser.add_argument("--out", required=True, help="output GSEM file")
    parser.add_argument("--model", default=DEFAULT_MODEL)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--max-len", type=int, default=128)
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--exclude-special-tokens",
        action="store_true",
        help="drop [CLS]/[SEP]-style positions from the mean",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = ExtractorConfig(
        corpus_root=args.corpus,
        output_path=args.out,
        model=args.model,
        batch_size=args.batch,
        max_length=args.max_len,
        device=args.device,
        include_special_tokens=not args.exclude_special_tokens,
    )
    try:
        count, dim = extract(config)
    except (FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({count} rows, dim {dim})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
