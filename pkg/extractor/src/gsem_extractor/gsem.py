"""Writer for the GSEM sentence-embedding container.

Little-endian layout: magic "GSEM" | u32 version=1 | u32 dim | u64 count |
count*dim float32 row-major | count length-prefixed (u32) UTF-8 ids.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"GSEM"
FORMAT_VERSION = 1


def write_gsem(path: str | Path, ids: Sequence[str], rows: np.ndarray) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError(f"rows must be 2-D, got shape {rows.shape}")
    if len(ids) != rows.shape[0]:
        raise ValueError(f"{len(ids)} ids for {rows.shape[0]} rows")
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<IIQ", FORMAT_VERSION, rows.shape[1], rows.shape[0]))
        handle.write(rows.tobytes())
        for gid in ids:
            encoded = gid.encode("utf-8")
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)
