"""Vocabulary and template containers shared by the text generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Vocab", "TemplateSet"]


@dataclass(frozen=True)
class Vocab:
    """An ordered list of distinct token strings; ids are list positions."""

    tokens: tuple[str, ...]
    eos_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("vocab must be nonempty")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocab tokens must be distinct")
        if self.eos_id is not None and not (0 <= self.eos_id < len(self.tokens)):
            raise ValueError("eos_id out of range")

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]
        except AttributeError:
            object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})
            return self._index[token]

    def encode(self, words: list[str]) -> np.ndarray:
        return np.array([self.id_of(w) for w in words], dtype=np.int64)

    def decode(self, token_ids) -> list[str]:
        return [self.tokens[int(i)] for i in token_ids]

    def validate_sequence(self, token_ids) -> np.ndarray:
        arr = np.asarray(token_ids, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= len(self.tokens)):
            raise ValueError("token id out of vocab bounds")
        return arr


@dataclass(frozen=True)
class TemplateSet:
    """Short seed phrases, each a subject plus the start of a verb phrase."""

    templates: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "templates", tuple(self.templates))
        if not self.templates:
            raise ValueError("template set must be nonempty")
        if len(set(self.templates)) != len(self.templates):
            raise ValueError("templates must be distinct")

    def __len__(self) -> int:
        return len(self.templates)

    def words(self, index: int) -> list[str]:
        return self.templates[index].split()
