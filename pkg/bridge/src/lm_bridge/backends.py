"""Next-token distribution backends for the bridge server."""

from __future__ import annotations

import json

__all__ = ["DemoBackend", "TableBackend", "TransformersBackend", "load_backend"]

_DEMO_VOCAB = (
    "the a an of to was for known as worked described regarded thought well "
    "woman man child person doctor teacher job part time earned money by had "
    "started working garden sea music star farm court book paint storm bread "
    "wheel glass stone river cloud meadow harbor lantern <eos>"
).split()


class DemoBackend:
    """Deterministic model-free backend for conformance testing.

    Each context hashes to a blend between a flat profile and a rank-decay
    profile, so different contexts give different (but always valid and
    repeatable) distributions.
    """

    def __init__(self):
        self.vocab = list(_DEMO_VOCAB)
        self.eos_id = len(self.vocab) - 1

    def next_probs(self, context: list[int]) -> list[float]:
        n = len(self.vocab)
        key = 0
        for token in context:
            key = (key * 31 + int(token) + 1) % 997
        mix = (key % 101) / 100.0
        probs = []
        for i in range(n):
            flat = 1.0 / n
            peaked = 2.0 * (n - i) / (n * (n + 1))
            probs.append((1.0 - mix) * flat + mix * peaked)
        total = sum(probs)
        return [p / total for p in probs]


class TableBackend:
    """Scripted distributions from a JSON file.

    Schema: {"vocab": [...], "eos_id": int|null, "default": [probs],
    "contexts": {"<space-joined ids>": [probs]}}. A request's full context
    is looked up exactly; anything unlisted falls back to "default".
    """

    def __init__(self, path: str):
        with open(path, "r", encoding="utf-8") as f:
            spec = json.load(f)
        self.vocab = list(spec["vocab"])
        if not self.vocab:
            raise ValueError("table backend needs a nonempty vocab")
        self.eos_id = spec.get("eos_id")
        self._default = self._validated(spec["default"])
        self._contexts = {
            key: self._validated(probs) for key, probs in spec.get("contexts", {}).items()
        }

    def _validated(self, probs) -> list[float]:
        probs = [float(p) for p in probs]
        if len(probs) != len(self.vocab):
            raise ValueError("probability row length must equal vocab size")
        total = sum(probs)
        if total <= 0 or any(p < 0 for p in probs):
            raise ValueError("probability rows must be nonnegative with positive sum")
        return [p / total for p in probs]

    def next_probs(self, context: list[int]) -> list[float]:
        key = " ".join(str(int(t)) for t in context)
        return self._contexts.get(key, self._default)


class TransformersBackend:
    """Pretrained causal LM (e.g. distilgpt2) behind the protocol.

    The vocabulary is the tokenizer's own subword space; the handshake
    exposes it verbatim, and callers treat ids opaquely. Loading happens at
    construction so startup failures exit nonzero before serving.
    """

    def __init__(self, model_id: str):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForCausalLM.from_pretrained(model_id)
        self._model.eval()
        size = self._model.get_input_embeddings().weight.shape[0]
        self.vocab = self._tokenizer.convert_ids_to_tokens(list(range(size)))
        self.eos_id = self._tokenizer.eos_token_id
        self._bos = self._tokenizer.bos_token_id
        if self._bos is None:
            self._bos = self.eos_id

    def next_probs(self, context: list[int]) -> list[float]:
        torch = self._torch
        ids = [int(t) for t in context] or [int(self._bos)]
        with torch.no_grad():
            logits = self._model(torch.tensor([ids])).logits[0, -1].double()
            probs = torch.softmax(logits, dim=-1)
        return probs.tolist()


def load_backend(name: str, model_file: str | None = None,
                 model_id: str | None = None):
    if name == "demo":
        return DemoBackend()
    if name == "table":
        if not model_file:
            raise ValueError("table backend needs --model-file")
        return TableBackend(model_file)
    if name == "hf":
        if not model_id:
            raise ValueError("hf backend needs --model-id")
        return TransformersBackend(model_id)
    raise ValueError(f"unknown backend {name!r}")
