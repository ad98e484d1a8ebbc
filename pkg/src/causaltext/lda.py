"""Topic model backend: collapsed Gibbs training and document fold-in."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effects import TokenDistribution, clamp_normalize
from .kernels import gibbs_foldin_sweep, gibbs_train_sweep
from .seeding import child_rng
from .vocab import Vocab

__all__ = ["LdaModel", "train_lda", "infer_topic_mixture", "save_model", "load_model"]


@dataclass(frozen=True)
class LdaModel:
    """Learned topic mixture: per-topic word rows plus a topic prior.

    topic_word[k] is the smoothed word distribution of topic k;
    topic_prior is the smoothed share of tokens each topic attracted during
    training. metadata records corpus fingerprint, sweep count, seed, and
    how many empty documents were skipped.
    """

    n_topics: int
    topic_word: tuple[TokenDistribution, ...]
    topic_prior: TokenDistribution
    vocab: Vocab
    alpha: float
    beta: float
    metadata: dict

    def __post_init__(self):
        if self.n_topics != len(self.topic_word):
            raise ValueError("topic_word must have one row per topic")
        if len(self.topic_prior) != self.n_topics:
            raise ValueError("topic_prior must range over the topics")
        for row in self.topic_word:
            if len(row) != len(self.vocab):
                raise ValueError("topic rows must cover the vocabulary")

    def topic_word_matrix(self) -> np.ndarray:
        return np.stack([row.probs for row in self.topic_word])


def train_lda(
    corpus: list[np.ndarray],
    vocab: Vocab,
    k: int,
    alpha: float = 0.1,
    beta: float = 0.01,
    iters: int = 500,
    seed: int = 0,
) -> LdaModel:
    """Collapsed Gibbs sampling for `iters` full sweeps.

    Topic rows are the smoothed empirical assignment counts after the final
    sweep. Empty documents are skipped and counted in metadata. With k=1 the
    single row is the smoothed corpus unigram distribution, and iters=0
    leaves the seeded random initialization in place.
    """
    if not corpus:
        raise ValueError("corpus must be nonempty")
    if k < 1:
        raise ValueError("need at least one topic")
    if iters < 0:
        raise ValueError("iters must be nonnegative")
    kept_docs = [np.asarray(d, dtype=np.int64) for d in corpus if len(d) > 0]
    skipped = len(corpus) - len(kept_docs)
    if not kept_docs:
        raise ValueError("all documents are empty")
    n_vocab = len(vocab)
    doc_ids = np.concatenate(
        [np.full(len(d), i, dtype=np.int64) for i, d in enumerate(kept_docs)]
    )
    word_ids = np.concatenate(kept_docs)
    vocab.validate_sequence(word_ids)
    n_tokens = word_ids.shape[0]

    rng = child_rng("lda-train", seed, k, float(alpha), float(beta), iters)
    z = rng.integers(0, k, n_tokens).astype(np.int64)
    nkv = np.zeros((k, n_vocab), dtype=np.float64)
    nk = np.zeros(k, dtype=np.float64)
    ndk = np.zeros((len(kept_docs), k), dtype=np.float64)
    np.add.at(nkv, (z, word_ids), 1.0)
    np.add.at(nk, z, 1.0)
    np.add.at(ndk, (doc_ids, z), 1.0)

    for _ in range(iters):
        gibbs_train_sweep(doc_ids, word_ids, z, nkv, nk, ndk, alpha, beta, rng.random(n_tokens))

    topic_word = tuple(
        clamp_normalize(nkv[topic] + beta) for topic in range(k)
    )
    topic_prior = clamp_normalize(nk + alpha)
    from .corpus import corpus_fingerprint

    metadata = {
        "corpus_id": corpus_fingerprint(kept_docs, vocab),
        "iterations": iters,
        "seed": seed,
        "skipped_empty_documents": skipped,
        "n_documents": len(kept_docs),
        "n_tokens": int(n_tokens),
    }
    return LdaModel(
        n_topics=k,
        topic_word=topic_word,
        topic_prior=topic_prior,
        vocab=vocab,
        alpha=alpha,
        beta=beta,
        metadata=metadata,
    )


def save_model(model: LdaModel, path: str) -> None:
    """Write a model as JSON (shortest-round-trip floats, stable key order)."""
    import json

    payload = {
        "n_topics": model.n_topics,
        "alpha": model.alpha,
        "beta": model.beta,
        "vocab": list(model.vocab.tokens),
        "eos_id": model.vocab.eos_id,
        "topic_prior": [float(p) for p in model.topic_prior.probs],
        "topic_word": [[float(p) for p in row.probs] for row in model.topic_word],
        "metadata": model.metadata,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, sort_keys=True, allow_nan=False)
        f.write("\n")


def load_model(path: str) -> LdaModel:
    import json

    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    vocab = Vocab(tuple(payload["vocab"]), eos_id=payload.get("eos_id"))
    return LdaModel(
        n_topics=payload["n_topics"],
        topic_word=tuple(TokenDistribution(np.array(row)) for row in payload["topic_word"]),
        topic_prior=TokenDistribution(np.array(payload["topic_prior"])),
        vocab=vocab,
        alpha=payload["alpha"],
        beta=payload["beta"],
        metadata=payload["metadata"],
    )


def infer_topic_mixture(
    model: LdaModel,
    token_ids: np.ndarray,
    sweeps: int = 20,
    seed: int = 0,
) -> np.ndarray:
    """Fold-in topic proportions for one document against frozen topics.

    Runs `sweeps` Gibbs passes over the document's tokens with the trained
    topic rows held fixed and returns the smoothed topic mixture. An empty
    document yields the uniform mixture.
    """
    token_ids = model.vocab.validate_sequence(token_ids)
    k = model.n_topics
    if token_ids.size == 0:
        return np.full(k, 1.0 / k)
    rng = child_rng("lda-foldin", seed, sweeps)
    z = rng.integers(0, k, token_ids.size).astype(np.int64)
    ndk = np.bincount(z, minlength=k).astype(np.float64)
    phi = model.topic_word_matrix()
    for _ in range(sweeps):
        gibbs_foldin_sweep(token_ids, z, phi, ndk, model.alpha, rng.random(token_ids.size))
    theta = ndk + model.alpha
    return theta / theta.sum()
