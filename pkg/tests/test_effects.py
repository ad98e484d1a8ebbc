import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causaltext.effects import (
    EffectParams,
    OrderingPair,
    TokenDistribution,
    VocabOrdering,
    apply_effect,
    clamp_normalize,
    effect_exponent,
    effect_pair,
    kendall_tau,
    rank_zipfian,
    sample_ordering_pair,
)
from causaltext.seeding import child_rng

from .conftest import brute_force_kendall


def ordering(*ranks):
    return VocabOrdering(np.array(ranks, dtype=np.int64))


class TestKendallTau:
    def test_identical_orderings(self):
        for n in (2, 5, 17):
            v = VocabOrdering.identity(n)
            assert kendall_tau(v, v) == 1.0

    def test_full_reversal(self):
        for n in (2, 5, 17):
            assert kendall_tau(VocabOrdering.identity(n), VocabOrdering.reversal(n)) == -1.0

    def test_three_item_example(self):
        # pairs (0,1) concordant, (0,2) concordant, (1,2) discordant -> 1/3
        assert kendall_tau(ordering(1, 2, 3), ordering(1, 3, 2)) == pytest.approx(1 / 3)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kendall_tau(VocabOrdering.identity(3), VocabOrdering.identity(4))

    @given(st.integers(2, 40), st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_matches_pair_enumeration(self, n, seed):
        rng = np.random.default_rng(seed)
        a = rng.permutation(n) + 1
        b = rng.permutation(n) + 1
        fast = kendall_tau(VocabOrdering(a), VocabOrdering(b))
        assert fast == pytest.approx(brute_force_kendall(a, b), abs=1e-12)


class TestSampleOrderingPair:
    def test_tau_zero_is_identity(self):
        pair = sample_ordering_pair(16, 0.0, seed=3)
        assert np.array_equal(pair.v1.ranks, pair.v0.ranks)
        assert pair.achieved_tau_correlation == 1.0

    def test_tau_one_is_reversal(self):
        pair = sample_ordering_pair(16, 1.0, seed=3)
        assert np.array_equal(pair.v1.ranks, VocabOrdering.reversal(16).ranks)
        assert pair.achieved_tau_correlation == -1.0

    def test_v0_is_identity(self):
        pair = sample_ordering_pair(30, 0.4, seed=9)
        assert np.array_equal(pair.v0.ranks, VocabOrdering.identity(30).ranks)

    @pytest.mark.parametrize("tau", [0.1, 0.5, 0.84])
    def test_mean_achieved_near_target(self, tau):
        achieved = [
            sample_ordering_pair(16, tau, seed).achieved_tau_correlation
            for seed in range(100)
        ]
        assert abs(np.mean(achieved) - (1 - 2 * tau)) <= 0.05

    def test_deterministic(self):
        a = sample_ordering_pair(40, 0.3, seed=11)
        b = sample_ordering_pair(40, 0.3, seed=11)
        assert np.array_equal(a.v1.ranks, b.v1.ranks)
        assert a.achieved_tau_correlation == b.achieved_tau_correlation

    def test_tiny_vocab_returns_nearest_achievable(self):
        pair = sample_ordering_pair(2, 0.5, seed=0)
        # n=2 can only realize +/-1; the achieved value is recorded honestly
        assert pair.achieved_tau_correlation in (-1.0, 1.0)

    def test_achieved_matches_recomputation(self):
        pair = sample_ordering_pair(25, 0.35, seed=4)
        assert pair.achieved_tau_correlation == kendall_tau(pair.v0, pair.v1)

    def test_large_vocab_hits_target(self):
        pair = sample_ordering_pair(2000, 0.45, seed=1)
        assert abs(pair.achieved_tau_correlation - 0.1) <= 0.001

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            sample_ordering_pair(1, 0.5, seed=0)
        with pytest.raises(ValueError):
            sample_ordering_pair(8, 1.5, seed=0)


class TestClampNormalize:
    def test_uniform(self):
        out = clamp_normalize(np.array([1.0, 1.0, 1.0, 1.0]))
        assert np.allclose(out.probs, 0.25)

    def test_zero_entry_gets_floor(self):
        out = clamp_normalize(np.array([0.0, 1.0]))
        assert out.probs[0] == pytest.approx(1e-10, rel=1e-6)
        assert out.probs[1] == pytest.approx(1.0 - 1e-10)

    def test_direct_normalization(self):
        out = clamp_normalize(np.array([2.0, 1.0, 1.0]))
        assert np.allclose(out.probs, [0.5, 0.25, 0.25])

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            clamp_normalize(np.zeros(3))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            clamp_normalize(np.array([0.5, -0.1, 0.6]))

    @given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=50))
    @settings(max_examples=100, deadline=None)
    def test_idempotent_and_valid(self, raw):
        vec = np.array(raw)
        if vec.sum() <= 0:
            with pytest.raises(ValueError):
                clamp_normalize(vec)
            return
        once = clamp_normalize(vec)
        twice = clamp_normalize(once.probs)
        assert np.array_equal(once.probs, twice.probs)
        assert abs(once.probs.sum() - 1.0) <= 1e-9


class TestRankZipfian:
    def test_delta_zero_uniform(self):
        out = rank_zipfian(VocabOrdering.identity(8), 0.0)
        assert np.allclose(out.probs, 1 / 8)

    def test_two_token_hand_value(self):
        # exponent -1 gives weights (1, 1/2) -> (2/3, 1/3)
        out = rank_zipfian(VocabOrdering.identity(2), 0.5)
        assert np.allclose(out.probs, [2 / 3, 1 / 3])

    def test_delta_one_point_mass(self):
        out = rank_zipfian(ordering(2, 1, 3), 1.0)
        assert out.probs[1] == pytest.approx(1.0 - 1e-10)

    def test_follows_ordering_not_index(self):
        out = rank_zipfian(ordering(3, 1, 2), 0.5)
        assert np.argmax(out.probs) == 1


class TestApplyEffect:
    def test_delta_zero_identity(self):
        p = clamp_normalize(np.array([0.1, 0.2, 0.3, 0.4]))
        out = apply_effect(p, ordering(4, 3, 2, 1), 0.0)
        assert np.array_equal(out.probs, p.probs)

    def test_blend_form_two_token_hand_value(self):
        # weights (1, 2**-0.5) on a uniform base
        p = clamp_normalize(np.array([0.5, 0.5]))
        out = apply_effect(p, VocabOrdering.identity(2), 1.0, form="blend")
        assert out.probs[0] == pytest.approx(0.5858, abs=1e-4)
        assert out.probs[1] == pytest.approx(0.4142, abs=1e-4)

    def test_monotone_in_rank_for_uniform_base(self):
        p = clamp_normalize(np.ones(16))
        rng = child_rng("apply-effect-test")
        ranks = rng.permutation(16) + 1
        out = apply_effect(p, VocabOrdering(ranks), 0.7)
        by_rank = out.probs[np.argsort(ranks)]
        assert np.all(np.diff(by_rank) <= 1e-15)

    def test_top_rank_mass_nondecreasing_in_delta(self):
        p = clamp_normalize(np.array([0.05, 0.1, 0.25, 0.6]))
        orderings = ordering(2, 1, 4, 3)
        top = np.argmin(orderings.ranks)
        last = 0.0
        for delta in np.linspace(0.0, 0.95, 12):
            mass = apply_effect(p, orderings, float(delta)).probs[top]
            assert mass >= last - 1e-12
            last = mass

    def test_length_mismatch(self):
        p = clamp_normalize(np.ones(3))
        with pytest.raises(ValueError):
            apply_effect(p, VocabOrdering.identity(4), 0.5)

    @given(
        st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=30),
        st.floats(0.0, 1.0),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=80, deadline=None)
    def test_output_is_valid_distribution(self, raw, delta, seed):
        p = clamp_normalize(np.array(raw))
        ranks = np.random.default_rng(seed).permutation(len(raw)) + 1
        out = apply_effect(p, VocabOrdering(ranks), delta)
        assert abs(out.probs.sum() - 1.0) <= 1e-9
        assert out.probs.min() >= 1e-10 * (1 - 1e-6)
        assert out.probs.max() <= 1.0 - 1e-10 + 1e-12


class TestEffectPair:
    def test_delta_zero_both_equal_base(self):
        p = clamp_normalize(np.array([0.1, 0.2, 0.3, 0.4]))
        pair = sample_ordering_pair(4, 0.9, seed=2)
        p0, p1 = effect_pair(p, 0.0, pair)
        assert np.array_equal(p0.probs, p.probs)
        assert np.array_equal(p1.probs, p.probs)

    def test_tau_zero_conditions_agree(self):
        p = clamp_normalize(np.array([0.4, 0.3, 0.2, 0.1]))
        pair = sample_ordering_pair(4, 0.0, seed=2)
        p0, p1 = effect_pair(p, 0.6, pair)
        assert np.array_equal(p0.probs, p1.probs)

    def test_matches_scalar_recomputation(self):
        # independent elementwise reimplementation of the reweighting
        p = np.array([0.1, 0.2, 0.3, 0.4])
        v0 = np.array([1, 2, 3, 4])
        v1 = np.array([4, 3, 2, 1])
        delta = 0.5
        expected = []
        for ranks in (v0, v1):
            weights = [p[i] * ranks[i] ** (-delta / (1 - delta)) for i in range(4)]
            total = sum(weights)
            expected.append([w / total for w in weights])
        pair = OrderingPair(
            v0=VocabOrdering(v0), v1=VocabOrdering(v1),
            achieved_tau_correlation=-1.0, target_tau=1.0,
        )
        p0, p1 = effect_pair(clamp_normalize(p), delta, pair)
        assert np.allclose(p0.probs, expected[0], atol=1e-12)
        assert np.allclose(p1.probs, expected[1], atol=1e-12)


class TestTokenDistribution:
    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            TokenDistribution(np.array([0.5, 0.4]))

    def test_rejects_out_of_bounds(self):
        with pytest.raises(ValueError):
            TokenDistribution(np.array([0.0, 1.0]))

    def test_sampling_matches_distribution(self):
        p = clamp_normalize(np.array([0.05, 0.15, 0.3, 0.5]))
        draws = p.sample(child_rng("tv-check"), 1_000_000)
        freq = np.bincount(draws, minlength=4) / 1_000_000
        assert 0.5 * np.abs(freq - p.probs).sum() <= 0.01


class TestEffectExponent:
    def test_forms(self):
        assert effect_exponent(0.5, "zipf") == pytest.approx(1.0)
        assert effect_exponent(0.5, "blend") == pytest.approx(1 / 3)
        assert np.isinf(effect_exponent(1.0, "zipf"))

    def test_rejects_unknown_form(self):
        with pytest.raises(ValueError):
            effect_exponent(0.5, "other")


class TestEffectParams:
    def test_bounds(self):
        EffectParams(0.0, 1.0)
        with pytest.raises(ValueError):
            EffectParams(-0.1, 0.5)
        with pytest.raises(ValueError):
            EffectParams(0.5, 1.2)


class TestOrderingPair:
    def test_validates_achieved_correlation(self):
        v0 = VocabOrdering.identity(4)
        v1 = VocabOrdering.reversal(4)
        with pytest.raises(ValueError):
            OrderingPair(v0=v0, v1=v1, achieved_tau_correlation=0.5)
