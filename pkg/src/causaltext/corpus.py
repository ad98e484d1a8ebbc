"""Bundled desk-scale corpus: seeded documents over themed word lists.

A stand-in training corpus for the topic-model and n-gram backends. Each
document mixes a couple of themes with interleaved function words, and a
fraction of documents open with one of the bundled seed templates so the
n-gram model learns sensible continuations for them.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .seeding import child_rng
from .vocab import TemplateSet, Vocab

__all__ = ["load_templates", "build_corpus", "corpus_fingerprint"]

_TEMPLATE_PREFIX_PROB = 0.4
_FUNCTION_WORD_PROB = 0.3


def _load_json(name: str) -> dict:
    with resources.files("causaltext.data").joinpath(name).open("r", encoding="utf-8") as f:
        return json.load(f)


def load_templates() -> TemplateSet:
    """The bundled subject x verb-phrase seed templates (6 x 10 = 60)."""
    data = _load_json("templates.json")
    return TemplateSet(
        tuple(f"{s} {v}" for s in data["subjects"] for v in data["verb_phrases"])
    )


def _word_universe() -> tuple[list[str], list[list[str]], list[str]]:
    data = _load_json("themes.json")
    theme_lists = [data["themes"][name] for name in sorted(data["themes"])]
    function_words = data["function_words"]
    template_words = sorted({w for t in load_templates().templates for w in t.split()})
    ordered: list[str] = []
    seen = set()
    for word in function_words + template_words:
        if word not in seen:
            ordered.append(word)
            seen.add(word)
    for words in theme_lists:
        for word in words:
            if word not in seen:
                ordered.append(word)
                seen.add(word)
    return ordered, theme_lists, function_words


def build_corpus(
    n_docs: int = 2000,
    seed: int = 0,
    min_len: int = 30,
    max_len: int = 70,
    vocab_cap: int = 5000,
) -> tuple[list[np.ndarray], Vocab]:
    """Seeded themed documents; returns (docs as id arrays, vocab).

    Document length is uniform in [min_len, max_len]. The vocabulary keeps
    its bundled order (function and template words first) and is truncated
    to `vocab_cap` types; truncation only matters if the bundled word lists
    ever outgrow the cap.
    """
    if n_docs < 1:
        raise ValueError("n_docs must be positive")
    if not (1 <= min_len <= max_len):
        raise ValueError("need 1 <= min_len <= max_len")
    words, theme_lists, function_words = _word_universe()
    words = words[:vocab_cap]
    keep = set(words)
    vocab = Vocab(tuple(words))
    theme_ids = [
        vocab.encode([w for w in theme if w in keep]) for theme in theme_lists
    ]
    theme_ids = [ids for ids in theme_ids if ids.size]
    function_ids = vocab.encode([w for w in function_words if w in keep])
    templates = load_templates()
    rng = child_rng("corpus", seed, n_docs, min_len, max_len, vocab_cap)
    docs = []
    for _ in range(n_docs):
        length = int(rng.integers(min_len, max_len + 1))
        k_themes = int(rng.integers(1, 4))
        picked = rng.choice(len(theme_ids), size=k_themes, replace=False)
        mix = rng.dirichlet(np.ones(k_themes))
        tokens: list[int] = []
        if rng.random() < _TEMPLATE_PREFIX_PROB:
            tpl = templates.words(int(rng.integers(len(templates))))
            tokens.extend(int(i) for i in vocab.encode(tpl))
        while len(tokens) < length:
            if rng.random() < _FUNCTION_WORD_PROB:
                tokens.append(int(function_ids[rng.integers(function_ids.size)]))
            else:
                theme = theme_ids[picked[rng.choice(k_themes, p=mix)]]
                tokens.append(int(theme[rng.integers(theme.size)]))
        docs.append(np.array(tokens[:length], dtype=np.int64))
    return docs, vocab


def corpus_fingerprint(docs: list[np.ndarray], vocab: Vocab) -> str:
    """Stable short id for provenance metadata."""
    import hashlib

    h = hashlib.sha256()
    h.update(("\x00".join(vocab.tokens)).encode("utf-8"))
    for doc in docs:
        h.update(np.asarray(doc, dtype=np.int64).tobytes())
        h.update(b"|")
    return h.hexdigest()[:16]
