"""Primary-side protocol tests against the scripted mock bridge.

These run without any real language model installed; the mock speaks the
wire protocol from a fixed table of distributions.
"""

import os
import sys

import numpy as np
import pytest

from causaltext.bridge_client import BridgeLm, BridgeProtocolError
from causaltext.effects import EffectParams
from causaltext.seeding import child_rng
from causaltext.textgen import SequentialGenerator, TextEffectConfig
from causaltext.vocab import TemplateSet

MOCK = [sys.executable, os.path.join(os.path.dirname(__file__), "mock_bridge.py")]


@pytest.fixture()
def bridge():
    lm = BridgeLm(MOCK)
    yield lm
    lm.close()


class TestBridgeLm:
    def test_handshake_vocab(self, bridge):
        assert len(bridge.vocab) > 0
        assert bridge.vocab.eos_id == len(bridge.vocab) - 1

    def test_distributions_valid_and_deterministic(self, bridge):
        ctx = np.array([1, 5, 2], dtype=np.int64)
        a = bridge.next_distribution(ctx)
        b = bridge.next_distribution(ctx)
        assert np.abs(a.probs - b.probs).max() <= 1e-6
        assert abs(a.probs.sum() - 1.0) <= 1e-9

    def test_many_contexts(self, bridge):
        rng = child_rng("bridge-contexts")
        for _ in range(50):
            length = int(rng.integers(0, 6))
            ctx = rng.integers(0, len(bridge.vocab), length)
            dist = bridge.next_distribution(ctx)
            assert abs(dist.probs.sum() - 1.0) <= 1e-9
            assert dist.probs.min() > 0

    def test_out_of_vocab_context_rejected_client_side(self, bridge):
        with pytest.raises(ValueError):
            bridge.next_distribution(np.array([10_000]))

    def test_invalid_probs_raise_with_position(self):
        lm = BridgeLm(MOCK + ["--bad-probs"])
        try:
            with pytest.raises(BridgeProtocolError) as err:
                lm.next_distribution(np.array([1, 2], dtype=np.int64))
            assert err.value.context_length == 2
        finally:
            lm._proc.kill()

    def test_dead_bridge_raises_transport_error(self):
        lm = BridgeLm(MOCK + ["--die-after", "2"])
        try:
            lm.next_distribution(np.array([1], dtype=np.int64))
            lm.next_distribution(np.array([2], dtype=np.int64))
            with pytest.raises(BridgeProtocolError) as err:
                lm.next_distribution(np.array([1, 2, 3], dtype=np.int64))
            assert err.value.context_length == 3
        finally:
            lm._proc.kill()

    def test_context_manager_shuts_down(self):
        with BridgeLm(MOCK) as lm:
            lm.next_distribution(np.array([], dtype=np.int64))
        assert lm._proc.poll() is not None


class TestSequentialOverBridge:
    def test_generation_end_to_end(self, bridge):
        templates = TemplateSet(("the woman worked as", "the man was known for"))
        cfg = TextEffectConfig(
            word=EffectParams(0.1, 0.4),
            context_effect=EffectParams(0.5, 0.5),
            ordering_seed=3,
        )
        gen = SequentialGenerator(bridge, cfg, templates, max_len=12)
        rng = child_rng("bridge-gen")
        for u in (0, 1):
            seq = gen.generate(u, rng)
            assert seq.size <= 12
            if seq.size:
                assert seq.max() < len(bridge.vocab)

    def test_deterministic_generation(self, bridge):
        templates = TemplateSet(("the woman worked as",))
        cfg = TextEffectConfig(
            word=EffectParams(0.2, 0.3),
            context_effect=EffectParams(0.0, 0.0),
            ordering_seed=1,
        )
        gen = SequentialGenerator(bridge, cfg, templates, max_len=8)
        a = gen.generate(1, child_rng("fixed"))
        b = gen.generate(1, child_rng("fixed"))
        assert np.array_equal(a, b)
