"""Token-sequence generators conditioned on the latent binary variable.

Three families share one mechanism: every sampling distribution (tokens,
topics, or seed templates) is split into a pair of condition-specific
distributions by `effects.effect_pair`, and the record's latent value picks
which one to sample from. Ordering pairs are sampled once per dataset so
the preference itself, not resampling noise, separates the conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effects import (
    EffectParams,
    TokenDistribution,
    apply_effect,
    clamp_normalize,
    effect_pair,
    sample_ordering_pair,
)
from .lda import LdaModel
from .ngram import SequentialLm
from .seeding import child_rng, child_seed
from .structured import StructuredParams, draw_structured_arrays
from .vocab import TemplateSet, Vocab

__all__ = [
    "TextEffectConfig",
    "DatasetRecord",
    "Dataset",
    "TrivialGenerator",
    "LdaGenerator",
    "SequentialGenerator",
    "default_trivial_vocab",
    "generate_trivial",
    "generate_lda",
    "generate_sequential",
    "generate_dataset",
]

DATASET_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TextEffectConfig:
    """Effect strengths for a text DGP.

    `word` acts on the token distributions; `context_effect` acts on the
    topic distribution (LDA) or the template distribution (sequential) and
    is absent for the trivial family. `ordering_seed` keys the per-dataset
    ordering pairs; `exponent_form` selects the delta-to-exponent mapping.
    """

    word: EffectParams
    context_effect: EffectParams | None = None
    ordering_seed: int = 0
    exponent_form: str = "zipf"

    def describe(self) -> dict:
        desc = {
            "tau_word": self.word.tau,
            "delta_word": self.word.delta,
            "ordering_seed": self.ordering_seed,
            "exponent_form": self.exponent_form,
        }
        if self.context_effect is not None:
            desc["tau_context"] = self.context_effect.tau
            desc["delta_context"] = self.context_effect.delta
        return desc


@dataclass(frozen=True)
class DatasetRecord:
    """One sample: structured bits plus the token sequence."""

    c: int
    u: int
    a: int
    y: int
    tokens: np.ndarray


@dataclass(frozen=True)
class Dataset:
    metadata: dict
    records: list[DatasetRecord]

    def __len__(self) -> int:
        return len(self.records)

    def structured_params(self) -> StructuredParams:
        return StructuredParams.from_text(self.metadata["structured_params"])


def default_trivial_vocab(n: int = 16) -> Vocab:
    return Vocab(tuple(f"w{i:02d}" for i in range(n)))


class TrivialGenerator:
    """i.i.d. tokens from a condition-split uniform base distribution."""

    def __init__(self, cfg: TextEffectConfig, vocab: Vocab, n_tokens: int = 16):
        if n_tokens < 1:
            raise ValueError("n_tokens must be positive")
        self.vocab = vocab
        self.n_tokens = n_tokens
        self.word_pair = sample_ordering_pair(
            len(vocab), cfg.word.tau, child_seed(cfg.ordering_seed, "word")
        )
        base = clamp_normalize(np.ones(len(vocab)))
        self.conditionals = effect_pair(base, cfg.word.delta, self.word_pair, cfg.exponent_form)

    def achieved_correlations(self) -> dict:
        return {"word": self.word_pair.achieved_tau_correlation}

    def generate(self, u: int, rng: np.random.Generator) -> np.ndarray:
        return self.conditionals[u].sample(rng, self.n_tokens)


class LdaGenerator:
    """Per token: a condition-split topic draw, then a condition-split word.

    One topic ordering pair (over topics) and one word ordering pair (over
    the whole vocabulary, shared by every topic) are sampled at
    construction and reused for all records.
    """

    def __init__(self, model: LdaModel, cfg: TextEffectConfig, length: int = 32):
        if cfg.context_effect is None:
            raise ValueError("LDA generation needs a topic-level effect")
        if length < 1:
            raise ValueError("length must be positive")
        self.model = model
        self.vocab = model.vocab
        self.length = length
        self.topic_pair = sample_ordering_pair(
            model.n_topics, cfg.context_effect.tau, child_seed(cfg.ordering_seed, "topic")
        ) if model.n_topics >= 2 else None
        self.word_pair = sample_ordering_pair(
            len(model.vocab), cfg.word.tau, child_seed(cfg.ordering_seed, "word")
        )
        if self.topic_pair is not None:
            topic_dists = effect_pair(
                model.topic_prior, cfg.context_effect.delta, self.topic_pair, cfg.exponent_form
            )
        else:
            topic_dists = (model.topic_prior, model.topic_prior)
        self._topic_cdfs = [np.cumsum(d.probs) for d in topic_dists]
        word_rows = []
        for u in range(2):
            ordering = (self.word_pair.v0, self.word_pair.v1)[u]
            rows = [
                apply_effect(row, ordering, cfg.word.delta, cfg.exponent_form).probs
                for row in model.topic_word
            ]
            word_rows.append(np.stack(rows))
        self._word_cdfs = [np.cumsum(rows, axis=1) for rows in word_rows]
        for cdf in self._topic_cdfs:
            cdf[-1] = 1.0
        for cdfs in self._word_cdfs:
            cdfs[:, -1] = 1.0

    def achieved_correlations(self) -> dict:
        out = {"word": self.word_pair.achieved_tau_correlation}
        if self.topic_pair is not None:
            out["context"] = self.topic_pair.achieved_tau_correlation
        return out

    def generate(self, u: int, rng: np.random.Generator) -> np.ndarray:
        topics = np.searchsorted(self._topic_cdfs[u], rng.random(self.length), side="right")
        word_cdfs = self._word_cdfs[u]
        draws = rng.random(self.length)
        tokens = np.empty(self.length, dtype=np.int64)
        for i in range(self.length):
            tokens[i] = np.searchsorted(word_cdfs[topics[i]], draws[i], side="right")
        return tokens


class SequentialGenerator:
    """Template seed plus autoregressive tokens, each step condition-split.

    The template draw and every next-token distribution pass through the
    same effect machinery; generation stops at the model's end-of-sequence
    token or after max_len generated tokens. The template only conditions
    the model - emitted sequences contain the generated continuation, not
    the template words, so template effects reach the text solely through
    the model's context sensitivity.
    """

    def __init__(self, lm: SequentialLm, cfg: TextEffectConfig,
                 templates: TemplateSet, max_len: int = 32):
        if cfg.context_effect is None:
            raise ValueError("sequential generation needs a template-level effect")
        if max_len < 1:
            raise ValueError("max_len must be positive")
        self.lm = lm
        self.vocab = lm.vocab
        self.templates = templates
        self.max_len = max_len
        self._form = cfg.exponent_form
        if len(templates) >= 2:
            self.template_pair = sample_ordering_pair(
                len(templates), cfg.context_effect.tau, child_seed(cfg.ordering_seed, "template")
            )
            template_base = clamp_normalize(np.ones(len(templates)))
            template_dists = effect_pair(
                template_base, cfg.context_effect.delta, self.template_pair, cfg.exponent_form
            )
            self._template_cdfs = [np.cumsum(d.probs) for d in template_dists]
            for cdf in self._template_cdfs:
                cdf[-1] = 1.0
        else:
            self.template_pair = None
            self._template_cdfs = [np.ones(1), np.ones(1)]
        self.word_pair = sample_ordering_pair(
            len(lm.vocab), cfg.word.tau, child_seed(cfg.ordering_seed, "word")
        )
        self._word_delta = cfg.word.delta
        try:
            self._template_ids = [
                self.vocab.encode(templates.words(i)) for i in range(len(templates))
            ]
        except KeyError as exc:
            raise ValueError(f"template word missing from the LM vocabulary: {exc}") from exc

    def achieved_correlations(self) -> dict:
        out = {"word": self.word_pair.achieved_tau_correlation}
        if self.template_pair is not None:
            out["context"] = self.template_pair.achieved_tau_correlation
        return out

    def step_distribution(self, u: int, context: np.ndarray) -> TokenDistribution:
        """The condition-split next-token distribution at one position."""
        base = self.lm.next_distribution(context)
        ordering = (self.word_pair.v0, self.word_pair.v1)[u]
        return apply_effect(base, ordering, self._word_delta, self._form)

    def generate(self, u: int, rng: np.random.Generator) -> np.ndarray:
        t_idx = int(np.searchsorted(self._template_cdfs[u], rng.random(), side="right"))
        context = list(self._template_ids[t_idx])
        prefix = len(context)
        eos = self.vocab.eos_id
        for _ in range(self.max_len):
            dist = self.step_distribution(u, np.array(context, dtype=np.int64))
            token = int(dist.sample(rng, 1)[0])
            if eos is not None and token == eos:
                break
            context.append(token)
        return np.array(context[prefix:], dtype=np.int64)


def generate_trivial(u: int, cfg: TextEffectConfig, n_tokens: int = 16,
                     vocab: Vocab | None = None, seed: int = 0) -> np.ndarray:
    """One trivial-family sequence for latent value `u`."""
    vocab = vocab if vocab is not None else default_trivial_vocab()
    gen = TrivialGenerator(cfg, vocab, n_tokens)
    return gen.generate(int(u), child_rng("trivial-one", seed))


def generate_lda(model: LdaModel, u: int, cfg: TextEffectConfig,
                 length: int = 32, seed: int = 0) -> np.ndarray:
    """One topic-model sequence for latent value `u`."""
    gen = LdaGenerator(model, cfg, length)
    return gen.generate(int(u), child_rng("lda-one", seed))


def generate_sequential(lm: SequentialLm, u: int, cfg: TextEffectConfig,
                        templates: TemplateSet, max_len: int = 32,
                        seed: int = 0) -> np.ndarray:
    """One sequential-LM sequence for latent value `u`."""
    gen = SequentialGenerator(lm, cfg, templates, max_len)
    return gen.generate(int(u), child_rng("sequential-one", seed))


def _build_generator(dgp: str, cfg: TextEffectConfig, *, vocab=None, model=None,
                     lm=None, templates=None, n_tokens=16, length=32, max_len=32):
    if dgp == "trivial":
        return TrivialGenerator(cfg, vocab if vocab is not None else default_trivial_vocab(), n_tokens)
    if dgp == "lda":
        if model is None:
            raise ValueError("lda dataset generation needs a trained model")
        return LdaGenerator(model, cfg, length)
    if dgp == "sequential":
        if lm is None or templates is None:
            raise ValueError("sequential dataset generation needs an LM and templates")
        return SequentialGenerator(lm, cfg, templates, max_len)
    raise ValueError(f"unknown dgp: {dgp!r}")


def generate_dataset(structured: StructuredParams, dgp: str, cfg: TextEffectConfig,
                     n: int, seed: int, **resources) -> Dataset:
    """Draw n records: structured bits ancestrally, text conditioned on u only.

    Record i depends only on (seed, i): the structured block is one
    fixed-shape vectorized draw and each record's text uses its own derived
    generator, so any parallel split over records reproduces serial output.
    Metadata captures every seed, effect parameter, achieved ordering
    correlation, and the structured parameterization itself.
    """
    if n < 1:
        raise ValueError("n must be positive")
    generator = _build_generator(dgp, cfg, **resources)
    c, u, a, y = draw_structured_arrays(structured, n, seed)
    records = []
    for i in range(n):
        rng = child_rng("record-text", seed, i)
        tokens = generator.generate(int(u[i]), rng)
        records.append(DatasetRecord(int(c[i]), int(u[i]), int(a[i]), int(y[i]), tokens))
    metadata = {
        "format_version": DATASET_FORMAT_VERSION,
        "dgp": dgp,
        "n": n,
        "seed": seed,
        "structured_seed": structured.seed,
        "structured_params": structured.to_text(),
        "effects": cfg.describe(),
        "achieved_correlations": generator.achieved_correlations(),
        "vocab": list(generator.vocab.tokens),
        "eos_id": generator.vocab.eos_id,
    }
    if dgp == "sequential":
        metadata["templates"] = list(generator.templates.templates)
        metadata["max_len"] = generator.max_len
    else:
        metadata["doc_len"] = generator.n_tokens if dgp == "trivial" else generator.length
    return Dataset(metadata=metadata, records=records)
