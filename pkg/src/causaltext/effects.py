"""Vocabulary preferences and the machinery that injects them into sampling.

A latent binary variable influences text through a pair of vocabulary
orderings ("preferences"). `tau` controls how much the two orderings
disagree (their Kendall correlation targets 1 - 2*tau) and `delta` controls
how strongly each ordering reshapes a base token distribution. With both at
zero the latent variable has no effect on generation at all.

Two delta-to-exponent mappings are supported for the reweighting power
rank**(-exponent):

* ``"zipf"`` (default): exponent delta/(1 - delta), saturating to a point
  mass on the top-ranked token at delta = 1.
* ``"blend"``: exponent delta/(1 + delta), a bounded variant that never
  concentrates past rank**(-1/2).

The zipf form is what the benchmark grids assume; the blend form is kept
for comparison since it changes only this one mapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import child_rng

__all__ = [
    "PROB_FLOOR",
    "PROB_CEIL",
    "TokenDistribution",
    "VocabOrdering",
    "EffectParams",
    "OrderingPair",
    "clamp_normalize",
    "kendall_tau",
    "sample_ordering_pair",
    "rank_zipfian",
    "apply_effect",
    "effect_pair",
    "effect_exponent",
]

PROB_FLOOR = 1e-10
PROB_CEIL = 1.0 - 1e-10

# Slack for validating entries that were clamped and then renormalized once:
# dividing by a sum of 1 +/- n*1e-10 can push an entry a hair past the bound.
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class TokenDistribution:
    """A probability vector over a vocabulary, clamped away from 0 and 1."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.shape[0] == 0:
            raise ValueError("probs must be a nonempty 1-d vector")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probs must sum to 1 within 1e-9, got {probs.sum()!r}")
        if probs.shape[0] == 1:
            # a singleton vocabulary cannot satisfy the clamp bounds; the
            # only representable distribution is the exact point mass
            if probs[0] != 1.0:
                raise ValueError("a length-1 distribution must be exactly [1.0]")
            return
        lo = float(probs.min())
        hi = float(probs.max())
        if lo < PROB_FLOOR * (1.0 - 1e-6) - _BOUND_SLACK or hi > PROB_CEIL + _BOUND_SLACK:
            raise ValueError(f"probs must lie in [{PROB_FLOOR}, {PROB_CEIL}], got [{lo}, {hi}]")

    def __len__(self) -> int:
        return self.probs.shape[0]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` i.i.d. token ids by inverse-CDF sampling."""
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


@dataclass(frozen=True)
class VocabOrdering:
    """A preference over tokens: ranks[i] is token i's 1-based position."""

    ranks: np.ndarray

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64)
        object.__setattr__(self, "ranks", ranks)
        n = ranks.shape[0]
        if ranks.ndim != 1 or n == 0:
            raise ValueError("ranks must be a nonempty 1-d vector")
        seen = np.zeros(n, dtype=bool)
        if ranks.min() < 1 or ranks.max() > n:
            raise ValueError("ranks must be a permutation of 1..n")
        seen[ranks - 1] = True
        if not seen.all():
            raise ValueError("ranks must be a permutation of 1..n")

    def __len__(self) -> int:
        return self.ranks.shape[0]

    @classmethod
    def identity(cls, n: int) -> "VocabOrdering":
        return cls(np.arange(1, n + 1, dtype=np.int64))

    @classmethod
    def reversal(cls, n: int) -> "VocabOrdering":
        return cls(np.arange(n, 0, -1, dtype=np.int64))


@dataclass(frozen=True)
class EffectParams:
    """Strength knobs for one effect channel; both live in [0, 1]."""

    tau: float
    delta: float

    def __post_init__(self):
        for name, value in (("tau", self.tau), ("delta", self.delta)):
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value!r}")


@dataclass(frozen=True)
class OrderingPair:
    """The two per-condition orderings plus their realized correlation."""

    v0: VocabOrdering
    v1: VocabOrdering
    achieved_tau_correlation: float
    target_tau: float = float("nan")

    def __post_init__(self):
        if len(self.v0) != len(self.v1):
            raise ValueError("orderings must cover the same vocabulary")
        achieved = kendall_tau(self.v0, self.v1)
        if achieved != self.achieved_tau_correlation:
            raise ValueError(
                f"achieved_tau_correlation {self.achieved_tau_correlation!r} "
                f"does not match kendall_tau(v0, v1) = {achieved!r}"
            )


def clamp_normalize(raw) -> TokenDistribution:
    """Rescale to sum 1, clamp into [1e-10, 1 - 1e-10], renormalize once.

    Idempotent on vectors that already satisfy the TokenDistribution
    invariants. Raises ValueError on all-zero or negative input.
    """
    vec = np.asarray(raw, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] == 0:
        raise ValueError("expected a nonempty 1-d vector")
    if not np.all(np.isfinite(vec)) or np.any(vec < 0):
        raise ValueError("entries must be finite and nonnegative")
    total = float(vec.sum())
    if total <= 0.0:
        raise ValueError("cannot normalize an all-zero vector")
    if vec.shape[0] == 1:
        return TokenDistribution(np.array([1.0]))
    if abs(total - 1.0) > 1e-9:  # already-normalized input passes through bit-exact
        vec = vec / total
    clamped = np.clip(vec, PROB_FLOOR, PROB_CEIL)
    # Entries within validation slack of the bounds count as already clamped,
    # which keeps the operation a bit-exact fixed point on its own outputs.
    if float(np.max(np.abs(clamped - vec))) <= PROB_FLOOR * 1e-6:
        return TokenDistribution(vec)
    return TokenDistribution(clamped / clamped.sum())


def _count_inversions(seq: np.ndarray) -> int:
    """Number of out-of-order pairs, by mergesort-style divide and conquer."""
    n = seq.shape[0]
    if n < 2:
        return 0
    mid = n // 2
    left, right = seq[:mid], seq[mid:]
    inv = _count_inversions(left) + _count_inversions(right)
    left_sorted = np.sort(left)
    inv += int((left.shape[0] - np.searchsorted(left_sorted, right, side="right")).sum())
    return inv


def kendall_tau(a: VocabOrdering, b: VocabOrdering) -> float:
    """(concordant - discordant) / (n*(n-1)/2) over all token pairs."""
    if len(a) != len(b):
        raise ValueError(f"orderings have different lengths: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 tokens for a rank correlation")
    # Relative permutation: b's ranks read in a's preference order. Discordant
    # pairs are exactly its inversions.
    order = np.argsort(a.ranks, kind="stable")
    relative = b.ranks[order]
    pairs = n * (n - 1) // 2
    discordant = _count_inversions(relative)
    return (pairs - 2 * discordant) / pairs


def _sample_inversion_code(n: int, total: int, rng: np.random.Generator) -> np.ndarray:
    """A random inversion table: code[i] in [0, n-1-i], summing to `total`.

    Budget is spread across positions with binomial draws proportional to
    remaining capacity, clipped so the exact total stays reachable, which
    scatters inversions over the whole ordering rather than piling them at
    one end.
    """
    code = np.zeros(n, dtype=np.int64)
    capacity_after = n * (n - 1) // 2
    remaining = total
    for i in range(n - 1):
        cap = n - 1 - i
        capacity_after -= cap
        if remaining == 0:
            break
        mean_share = remaining / (cap + capacity_after)
        c = rng.binomial(cap, min(1.0, mean_share))
        c = max(c, remaining - capacity_after)
        c = min(c, cap, remaining)
        code[i] = c
        remaining -= c
    return code


def sample_ordering_pair(n: int, tau: float, seed: int) -> OrderingPair:
    """Sample two orderings whose Kendall correlation targets 1 - 2*tau.

    The first ordering is always the identity. The second is decoded from a
    seeded random inversion table with exactly round(tau * n*(n-1)/2)
    inversions against the identity, which pins the correlation to within
    1/(n*(n-1)/2) of the target for any vocabulary size. For tiny n where
    the rounded target cannot represent tau (n=2 can only realize +/-1) the
    nearest representable ordering is returned; the realized correlation is
    always recorded on the pair.
    """
    if n < 2:
        raise ValueError("vocab size must be at least 2")
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau must be in [0, 1], got {tau!r}")
    pairs = n * (n - 1) // 2
    target = round(tau * pairs)
    if target == 0:
        v1 = VocabOrdering.identity(n)
    elif target == pairs:
        v1 = VocabOrdering.reversal(n)
    else:
        rng = child_rng("ordering-pair", n, float(tau), seed)
        code = _sample_inversion_code(n, target, rng)
        remaining = list(range(n))
        perm = np.empty(n, dtype=np.int64)  # perm[k] = token at preference rank k+1
        for i in range(n):
            perm[i] = remaining.pop(code[i])
        ranks = np.empty(n, dtype=np.int64)
        ranks[perm] = np.arange(1, n + 1, dtype=np.int64)
        v1 = VocabOrdering(ranks)
    v0 = VocabOrdering.identity(n)
    achieved = kendall_tau(v0, v1)
    return OrderingPair(v0=v0, v1=v1, achieved_tau_correlation=achieved, target_tau=tau)


def effect_exponent(delta: float, form: str = "zipf") -> float:
    """Map delta to the (positive) rank-power exponent for the given form."""
    if not (0.0 <= delta <= 1.0):
        raise ValueError(f"delta must be in [0, 1], got {delta!r}")
    if form == "zipf":
        if delta >= 1.0:
            return float("inf")
        return delta / (1.0 - delta)
    if form == "blend":
        return delta / (1.0 + delta)
    raise ValueError(f"unknown exponent form: {form!r}")


def _rank_weights(ranks: np.ndarray, exponent: float) -> np.ndarray:
    if np.isinf(exponent):
        # Analytic limit: all mass on the top-ranked token before clamping.
        return (ranks == 1).astype(np.float64)
    return ranks.astype(np.float64) ** (-exponent)


def rank_zipfian(ordering: VocabOrdering, delta: float) -> TokenDistribution:
    """Power-law distribution over a preference: prob ~ rank**(-d/(1-d)).

    delta = 0 is uniform; delta = 1 is handled as the analytic point-mass
    limit (then clamped, so the top token carries 1 - 1e-10).
    """
    exponent = effect_exponent(delta, "zipf")
    return clamp_normalize(_rank_weights(ordering.ranks, exponent))


def apply_effect(
    p: TokenDistribution, ordering: VocabOrdering, delta: float, form: str = "zipf"
) -> TokenDistribution:
    """Tilt a base distribution toward a preference: prob ~ p * rank**(-e).

    With delta = 0 this is exactly clamp_normalize(p); larger delta moves
    mass toward the ordering's top ranks.
    """
    if len(p) != len(ordering):
        raise ValueError("distribution and ordering cover different vocabularies")
    exponent = effect_exponent(delta, form)
    return clamp_normalize(p.probs * _rank_weights(ordering.ranks, exponent))


def effect_pair(
    p: TokenDistribution, delta: float, orderings: OrderingPair, form: str = "zipf"
) -> tuple[TokenDistribution, TokenDistribution]:
    """The two condition-specific distributions for one base distribution.

    Returns (apply_effect(p, v0, delta), apply_effect(p, v1, delta)); the
    caller samples from index u. One OrderingPair is meant to be reused for
    a whole dataset so that the preference, not its resampling noise, is
    what separates the conditions.
    """
    return (
        apply_effect(p, orderings.v0, delta, form),
        apply_effect(p, orderings.v1, delta, form),
    )
