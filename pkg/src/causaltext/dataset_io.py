"""Byte-reproducible dataset files.

UTF-8, newline-delimited JSON: line 1 is the metadata object, each further
line one record with integer fields c, u, a, y and a token id array. Key
order is fixed by construction and floats use shortest-round-trip decimals,
so identical inputs always produce identical bytes and files round-trip
exactly.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .textgen import Dataset, DatasetRecord

__all__ = ["dumps_dataset", "write_dataset", "read_dataset"]


def _encode(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def dumps_dataset(dataset: Dataset) -> str:
    lines = [_encode(dataset.metadata)]
    for rec in dataset.records:
        lines.append(
            _encode(
                {"c": rec.c, "u": rec.u, "a": rec.a, "y": rec.y,
                 "tokens": [int(t) for t in rec.tokens]}
            )
        )
    return "\n".join(lines) + "\n"


def write_dataset(dataset: Dataset, path: str) -> None:
    text = dumps_dataset(dataset)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def read_dataset(path: str) -> Dataset:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"empty dataset file: {path}")
    metadata = json.loads(lines[0])
    records = []
    vocab_size = len(metadata["vocab"])
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        obj = json.loads(line)
        tokens = np.array(obj["tokens"], dtype=np.int64)
        if tokens.size and (tokens.min() < 0 or tokens.max() >= vocab_size):
            raise ValueError(f"{path}:{lineno}: token id out of vocab bounds")
        for key in ("c", "u", "a", "y"):
            if obj[key] not in (0, 1):
                raise ValueError(f"{path}:{lineno}: field {key} must be 0 or 1")
        records.append(DatasetRecord(obj["c"], obj["u"], obj["a"], obj["y"], tokens))
    return Dataset(metadata=metadata, records=records)
