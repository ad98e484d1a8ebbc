"""Sequential language-model protocol and the built-in n-gram backend."""

from __future__ import annotations

from collections import Counter
from typing import Protocol, runtime_checkable

import numpy as np

from .effects import TokenDistribution, clamp_normalize
from .vocab import Vocab

__all__ = ["SequentialLm", "NgramLm", "build_ngram_lm"]


@runtime_checkable
class SequentialLm(Protocol):
    """Anything that maps a context to a next-token distribution.

    Implementations must be deterministic for a fixed context and expose
    their vocabulary; `vocab.eos_id`, when set, is the stop token for
    generation. Immutable implementations are safe for concurrent queries.
    """

    @property
    def vocab(self) -> Vocab: ...

    def next_distribution(self, context: np.ndarray) -> TokenDistribution: ...


class NgramLm:
    """Add-smoothing conditional frequency model of a fixed order.

    The distribution for a context depends on its last (order - 1) tokens;
    contexts never seen in training fall back to the uniform distribution
    through the smoothing floor. Counts are stored sparsely per context.
    Immutable after construction.
    """

    def __init__(self, order: int, smoothing: float, vocab: Vocab,
                 counts: dict[tuple[int, ...], Counter]):
        if order < 1:
            raise ValueError("order must be at least 1")
        if smoothing <= 0:
            raise ValueError("smoothing must be positive")
        self._order = order
        self._smoothing = float(smoothing)
        self._vocab = vocab
        self._counts = counts

    @property
    def vocab(self) -> Vocab:
        return self._vocab

    @property
    def order(self) -> int:
        return self._order

    def next_distribution(self, context) -> TokenDistribution:
        context = self._vocab.validate_sequence(context)
        key = tuple(int(t) for t in context[max(0, context.size - (self._order - 1)):])
        vec = np.full(len(self._vocab), self._smoothing)
        seen = self._counts.get(key)
        if seen is not None:
            for token, count in seen.items():
                vec[token] += count
        return clamp_normalize(vec)


def build_ngram_lm(
    corpus: list[np.ndarray],
    vocab: Vocab,
    order: int = 2,
    smoothing: float = 0.1,
    eos_token: str = "<eos>",
) -> NgramLm:
    """Count n-gram continuations over the corpus, with add-smoothing.

    An end-of-sequence token is appended to the vocabulary (if absent) and
    to every document, so the model learns where documents stop and
    generation can terminate naturally.
    """
    if not corpus:
        raise ValueError("corpus must be nonempty")
    if eos_token in vocab.tokens:
        eos_id = vocab.id_of(eos_token)
        lm_vocab = Vocab(vocab.tokens, eos_id=eos_id)
    else:
        eos_id = len(vocab)
        lm_vocab = Vocab(vocab.tokens + (eos_token,), eos_id=eos_id)
    counts: dict[tuple[int, ...], Counter] = {}
    for doc in corpus:
        doc = vocab.validate_sequence(doc)
        tokens = [int(t) for t in doc] + [eos_id]
        for i, token in enumerate(tokens):
            key = tuple(tokens[max(0, i - (order - 1)):i])
            row = counts.get(key)
            if row is None:
                row = Counter()
                counts[key] = row
            row[token] += 1
    return NgramLm(order=order, smoothing=smoothing, vocab=lm_vocab, counts=counts)
