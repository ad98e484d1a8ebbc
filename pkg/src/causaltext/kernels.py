"""Hot inner loops, compiled with numba when available.

Kernels take pre-drawn uniform variates instead of holding RNG state, so the
compiled and interpreted paths are bit-identical and all randomness stays
with the caller's seeded numpy generator.
"""

from __future__ import annotations

import numpy as np


def gibbs_train_sweep(doc_ids, word_ids, z, nkv, nk, ndk, alpha, beta, uniforms):
    """One collapsed-Gibbs sweep over all tokens, updating counts in place."""
    k_topics = nkv.shape[0]
    n_vocab = nkv.shape[1]
    cumw = np.empty(k_topics, dtype=np.float64)
    for t in range(doc_ids.shape[0]):
        d = doc_ids[t]
        w = word_ids[t]
        old = z[t]
        nkv[old, w] -= 1
        nk[old] -= 1
        ndk[d, old] -= 1
        total = 0.0
        for k in range(k_topics):
            wt = (nkv[k, w] + beta) / (nk[k] + n_vocab * beta) * (ndk[d, k] + alpha)
            total += wt
            cumw[k] = total
        r = uniforms[t] * total
        new = 0
        while cumw[new] < r and new < k_topics - 1:
            new += 1
        z[t] = new
        nkv[new, w] += 1
        nk[new] += 1
        ndk[d, new] += 1


def gibbs_foldin_sweep(word_ids, z, phi, ndk, alpha, uniforms):
    """One fold-in sweep for a single document against frozen topic rows."""
    k_topics = phi.shape[0]
    cumw = np.empty(k_topics, dtype=np.float64)
    for t in range(word_ids.shape[0]):
        w = word_ids[t]
        old = z[t]
        ndk[old] -= 1
        total = 0.0
        for k in range(k_topics):
            wt = phi[k, w] * (ndk[k] + alpha)
            total += wt
            cumw[k] = total
        r = uniforms[t] * total
        new = 0
        while cumw[new] < r and new < k_topics - 1:
            new += 1
        z[t] = new
        ndk[new] += 1


gibbs_train_sweep_py = gibbs_train_sweep
gibbs_foldin_sweep_py = gibbs_foldin_sweep

try:  # pragma: no cover - parity with the python path is tested directly
    from numba import njit

    gibbs_train_sweep = njit(cache=True)(gibbs_train_sweep_py)
    gibbs_foldin_sweep = njit(cache=True)(gibbs_foldin_sweep_py)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False
