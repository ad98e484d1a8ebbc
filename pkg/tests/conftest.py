import numpy as np
import pytest

from causaltext.corpus import build_corpus
from causaltext.structured import sample_structured_params


@pytest.fixture(scope="session")
def params0():
    return sample_structured_params(0)


@pytest.fixture(scope="session")
def small_corpus():
    return build_corpus(n_docs=400, seed=0)


def brute_force_kendall(ranks_a: np.ndarray, ranks_b: np.ndarray) -> float:
    """O(n^2) pair enumeration; the oracle the fast path is checked against."""
    n = len(ranks_a)
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            sign = (ranks_a[i] - ranks_a[j]) * (ranks_b[i] - ranks_b[j])
            if sign > 0:
                concordant += 1
            elif sign < 0:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def enumerate_joint_ate(joint: np.ndarray) -> float:
    """Adjustment formula by literal 16-cell enumeration, no vectorization."""
    p_cu = {}
    for c in range(2):
        for u in range(2):
            p_cu[(c, u)] = sum(joint[c, u, a, y] for a in range(2) for y in range(2))
    total = 0.0
    for c in range(2):
        for u in range(2):
            if p_cu[(c, u)] == 0:
                continue
            terms = {}
            for a in range(2):
                mass = joint[c, u, a, 0] + joint[c, u, a, 1]
                terms[a] = joint[c, u, a, 1] / mass
            total += (terms[1] - terms[0]) * p_cu[(c, u)]
    return total
