"""Optimal full matching of treated and control units.

A full matching partitions all units into sets, each holding either one
treated unit with one or more controls, or one control with one or more
treated; the objective is the total treated-control distance inside sets.
Small instances are solved exactly as a min-cost flow with degree lower
bounds; large ones use a documented greedy nearest-anchor construction.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MatchedGroups",
    "full_match",
    "full_match_scalar",
    "full_match_vectors",
    "matched_sets_estimate",
    "MCF_MAX_PAIRS",
]

MCF_MAX_PAIRS = 15_000  # distance-matrix entries above which the greedy engine runs


@dataclass(frozen=True)
class MatchedGroups:
    """A full matching: disjoint sets of record ids covering all units.

    Each set is (treated_ids, control_ids) with at least one of each and a
    star structure (one side is a single unit). total_distance is the sum
    of matched treated-control edge distances; engine records which solver
    produced the matching.
    """

    sets: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    total_distance: float
    engine: str

    def __post_init__(self):
        seen: set[int] = set()
        for treated, controls in self.sets:
            if not treated or not controls:
                raise ValueError("every matched set needs a treated and a control unit")
            if len(treated) > 1 and len(controls) > 1:
                raise ValueError("matched sets must be stars (one side a single unit)")
            for uid in (*treated, *controls):
                if uid in seen:
                    raise ValueError("matched sets must be disjoint")
                seen.add(uid)


class _MinCostFlow:
    """Successive shortest paths with potentials (all arc costs >= 0)."""

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.graph: list[list[list]] = [[] for _ in range(n_nodes)]

    def add_edge(self, u: int, v: int, cap: float, cost: float) -> tuple[int, int]:
        self.graph[u].append([v, cap, cost, len(self.graph[v])])
        self.graph[v].append([u, 0.0, -cost, len(self.graph[u]) - 1])
        return u, len(self.graph[u]) - 1

    def solve(self, source: int, sink: int):
        total_flow = 0.0
        total_cost = 0.0
        potential = [0.0] * self.n
        while True:
            dist = [np.inf] * self.n
            dist[source] = 0.0
            prev_edge: list[tuple[int, int] | None] = [None] * self.n
            heap = [(0.0, source)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                for idx, edge in enumerate(self.graph[u]):
                    v, cap, cost, _rev = edge
                    if cap <= 0:
                        continue
                    nd = d + cost + potential[u] - potential[v]
                    if nd < dist[v] - 1e-15:
                        dist[v] = nd
                        prev_edge[v] = (u, idx)
                        heapq.heappush(heap, (nd, v))
            if prev_edge[sink] is None:
                return total_flow, total_cost
            for i in range(self.n):
                if dist[i] < np.inf:
                    potential[i] += dist[i]
            bottleneck = np.inf
            node = sink
            while node != source:
                u, idx = prev_edge[node]
                bottleneck = min(bottleneck, self.graph[u][idx][1])
                node = u
            node = sink
            while node != source:
                u, idx = prev_edge[node]
                edge = self.graph[u][idx]
                edge[1] -= bottleneck
                self.graph[edge[0]][edge[3]][1] += bottleneck
                total_cost += bottleneck * edge[2]
                node = u
            total_flow += bottleneck


def _edges_to_groups(edges, treated_ids, control_ids, dist):
    """Strip non-star edges (cost cannot rise) and assemble matched sets."""
    deg_t = np.zeros(len(treated_ids), dtype=np.int64)
    deg_c = np.zeros(len(control_ids), dtype=np.int64)
    for i, j in edges:
        deg_t[i] += 1
        deg_c[j] += 1
    kept = []
    for i, j in sorted(edges, key=lambda e: -dist[e[0], e[1]]):
        if deg_t[i] > 1 and deg_c[j] > 1:
            deg_t[i] -= 1
            deg_c[j] -= 1
        else:
            kept.append((i, j))
    by_treated: dict[int, list[int]] = {}
    by_control: dict[int, list[int]] = {}
    for i, j in kept:
        by_treated.setdefault(i, []).append(j)
        by_control.setdefault(j, []).append(i)
    sets = []
    total = 0.0
    for i, j in kept:
        total += float(dist[i, j])
    visited_t: set[int] = set()
    visited_c: set[int] = set()
    for i in sorted(by_treated):
        partners = by_treated[i]
        if len(partners) >= 1 and all(len(by_control[j]) == 1 for j in partners):
            sets.append(((int(treated_ids[i]),), tuple(int(control_ids[j]) for j in sorted(partners))))
            visited_t.add(i)
            visited_c.update(partners)
    for j in sorted(by_control):
        if j in visited_c:
            continue
        anchors = by_control[j]
        sets.append((tuple(int(treated_ids[i]) for i in sorted(anchors)), (int(control_ids[j]),)))
        visited_c.add(j)
        visited_t.update(anchors)
    return tuple(sets), total


def _full_match_mcf(dist, treated_ids, control_ids, max_set_size):
    m, g = dist.shape
    # Nodes: treated 0..m-1, control m..m+g-1, then s, t, super-source, super-sink.
    s, t = m + g, m + g + 1
    super_s, super_t = m + g + 2, m + g + 3
    mcf = _MinCostFlow(m + g + 4)
    cap_controls = (max_set_size - 1) if max_set_size else g
    cap_treated = (max_set_size - 1) if max_set_size else m
    pair_edges = {}
    for i in range(m):
        mcf.add_edge(s, i, cap_controls - 1, 0.0)
        mcf.add_edge(super_s, i, 1, 0.0)
    for j in range(g):
        mcf.add_edge(m + j, t, cap_treated - 1, 0.0)
        mcf.add_edge(m + j, super_t, 1, 0.0)
    for i in range(m):
        for j in range(g):
            pair_edges[(i, j)] = mcf.add_edge(i, m + j, 1, float(dist[i, j]))
    mcf.add_edge(t, s, m + g, 0.0)
    mcf.add_edge(super_s, t, g, 0.0)
    mcf.add_edge(s, super_t, m, 0.0)
    flow, _cost = mcf.solve(super_s, super_t)
    if flow < m + g - 1e-9:
        raise RuntimeError(
            f"full matching infeasible: flow {flow} < {m + g}"
            " (set-size cap too tight for this stratum)"
        )
    edges = [
        (i, j) for (i, j), (u, idx) in pair_edges.items() if mcf.graph[u][idx][1] < 0.5
    ]
    sets, total = _edges_to_groups(edges, treated_ids, control_ids, dist)
    return MatchedGroups(sets=sets, total_distance=total, engine="mcf")


def _full_match_greedy(dist, treated_ids, control_ids, max_set_size):
    m, g = dist.shape
    if m <= g:
        anchor_dist = dist  # anchors are treated units
        anchors_are_treated = True
    else:
        anchor_dist = dist.T
        anchors_are_treated = False
    n_anchor, n_partner = anchor_dist.shape
    # Load cap keeps tied or clustered partners from piling onto one anchor,
    # which would leave that set's estimate riding on a single unit.
    if max_set_size is not None:
        cap = max_set_size - 1
        if cap * n_anchor < n_partner:
            raise RuntimeError("max_set_size too tight to cover all units")
    else:
        cap = max(2 * ((n_partner + n_anchor - 1) // n_anchor), 2)
    assignment = np.full(n_partner, -1, dtype=np.int64)
    load = np.zeros(n_anchor, dtype=np.int64)
    for j in range(n_partner):
        col = anchor_dist[:, j]
        open_mask = load < cap
        best = float(col[open_mask].min())
        candidates = np.nonzero(open_mask & (col <= best + 1e-12))[0]
        a = int(candidates[np.argmin(load[candidates])])
        assignment[j] = a
        load[a] += 1
    for a in range(n_anchor):
        if load[a] > 0:
            continue
        costs = anchor_dist[a].copy()
        movable = load[assignment] >= 2
        costs[~movable] = np.inf
        j = int(np.argmin(costs))
        if not np.isfinite(costs[j]):
            raise RuntimeError("greedy matching could not cover an anchor")
        load[assignment[j]] -= 1
        assignment[j] = a
        load[a] += 1
    sets = []
    total = 0.0
    for a in range(n_anchor):
        partners = np.nonzero(assignment == a)[0]
        total += float(anchor_dist[a, partners].sum())
        if anchors_are_treated:
            sets.append(((int(treated_ids[a]),), tuple(int(control_ids[j]) for j in partners)))
        else:
            sets.append(
                (tuple(int(treated_ids[j]) for j in partners), (int(control_ids[a]),))
            )
    return MatchedGroups(sets=tuple(sets), total_distance=total, engine="greedy")


def full_match_scalar(
    scores: np.ndarray,
    treated: np.ndarray,
    ids=None,
    min_bin: int = 10,
    mcf_max_pairs: int = MCF_MAX_PAIRS,
) -> MatchedGroups:
    """Full matching when distance is |score_i - score_j|.

    Small instances route to the exact min-cost-flow solver. At scale, a
    sorted sweep closes a bin whenever it holds at least `min_bin` units
    and both sides, so every bin is score-homogeneous; within a bin the
    minority side's units become set centers and the majority side is dealt
    to them in contiguous chunks. A trailing one-sided bin merges backward.
    """
    scores = np.asarray(scores, dtype=np.float64)
    treated = np.asarray(treated, dtype=bool)
    n = scores.shape[0]
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    if not (n == treated.shape[0] == ids.shape[0]):
        raise ValueError("scores, treated flags, and ids must align")
    n_treated = int(treated.sum())
    if n_treated == 0 or n_treated == n:
        raise ValueError("need at least one treated and one control unit")
    fully_tied = float(scores.max() - scores.min()) <= 1e-12
    if fully_tied:
        # one balanced bin: with all scores equal the weighted estimate then
        # collapses to the plain difference of outcome means
        min_bin = n
    elif n_treated * (n - n_treated) <= mcf_max_pairs:
        t_pos = np.nonzero(treated)[0]
        c_pos = np.nonzero(~treated)[0]
        dist = np.abs(scores[t_pos][:, None] - scores[c_pos][None, :])
        groups = _full_match_mcf(dist, ids[t_pos], ids[c_pos], None)
        return groups
    order = np.argsort(scores, kind="stable")
    bins: list[np.ndarray] = []
    current: list[int] = []
    has_t = has_c = False
    for pos in order:
        current.append(int(pos))
        has_t = has_t or bool(treated[pos])
        has_c = has_c or not treated[pos]
        if len(current) >= min_bin and has_t and has_c:
            bins.append(np.array(current, dtype=np.int64))
            current, has_t, has_c = [], False, False
    if current:
        if has_t and has_c and len(bins) == 0:
            bins.append(np.array(current, dtype=np.int64))
        elif bins:
            bins[-1] = np.concatenate([bins[-1], np.array(current, dtype=np.int64)])
        else:
            raise RuntimeError("scalar matching produced no mixed bin")
    sets = []
    total = 0.0
    for members in bins:
        flags = treated[members]
        t_units = members[flags]
        c_units = members[~flags]
        if t_units.size <= c_units.size:
            centers, leaves, centers_treated = t_units, c_units, True
        else:
            centers, leaves, centers_treated = c_units, t_units, False
        # centers are the minority side, so every chunk is nonempty
        chunks = np.array_split(leaves, centers.size)
        for center, chunk in zip(centers, chunks):
            total += float(np.abs(scores[chunk] - scores[center]).sum())
            if centers_treated:
                sets.append(((int(ids[center]),), tuple(int(ids[x]) for x in chunk)))
            else:
                sets.append((tuple(int(ids[x]) for x in chunk), (int(ids[center]),)))
    return MatchedGroups(sets=tuple(sets), total_distance=total, engine="scalar-bins")


def _principal_projection(vectors: np.ndarray) -> np.ndarray:
    """Deterministic first-principal-component scores of the rows.

    Power iteration from a fixed start; the sign is pinned by the largest
    loading. Degenerate (zero-variance) inputs project to all zeros.
    """
    centered = vectors - vectors.mean(axis=0, keepdims=True)
    cov = centered.T @ centered
    # Start from the largest centered row: a constant start vector would be
    # orthogonal to every direction of variation of simplex-valued rows.
    row_norms = np.linalg.norm(centered, axis=1)
    if row_norms.max() < 1e-12:
        return np.zeros(vectors.shape[0])
    direction = centered[int(np.argmax(row_norms))]
    direction = direction / np.linalg.norm(direction)
    for _ in range(60):
        nxt = cov @ direction
        norm = np.linalg.norm(nxt)
        if norm < 1e-12:
            return np.zeros(vectors.shape[0])
        direction = nxt / norm
    pivot = int(np.argmax(np.abs(direction)))
    if direction[pivot] < 0:
        direction = -direction
    return centered @ direction


def full_match_vectors(
    vectors: np.ndarray,
    treated: np.ndarray,
    ids=None,
    mcf_max_pairs: int = MCF_MAX_PAIRS,
    min_bin: int = 10,
) -> MatchedGroups:
    """Full matching on row vectors under cosine distance.

    Small instances get the exact min-cost-flow solve on the cosine
    distance matrix. At scale, units are ordered by their first principal
    component (which carries the dominant separation in the vectors) and
    grouped by the same sorted-bin star construction used for scalar
    scores, so locally similar vectors share sets in either orientation.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    treated = np.asarray(treated, dtype=bool)
    n = vectors.shape[0]
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    n_treated = int(treated.sum())
    if n_treated == 0 or n_treated == n:
        raise ValueError("need at least one treated and one control unit")
    if n_treated * (n - n_treated) <= mcf_max_pairs:
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms <= 0):
            raise ValueError("zero-length representation vector")
        t_pos = np.nonzero(treated)[0]
        c_pos = np.nonzero(~treated)[0]
        sims = (vectors[t_pos] @ vectors[c_pos].T) / (
            norms[t_pos][:, None] * norms[c_pos][None, :]
        )
        dist = np.clip(1.0 - sims, 0.0, None)
        if dist.max() > 1e-12:  # fully tied instances take the balanced path
            return _full_match_mcf(dist, ids[t_pos], ids[c_pos], None)
    projection = _principal_projection(vectors)
    return full_match_scalar(projection, treated, ids=ids, min_bin=min_bin,
                             mcf_max_pairs=0)


def full_match(
    dist: np.ndarray,
    treated_ids,
    control_ids,
    max_set_size: int | None = None,
    mcf_max_pairs: int = MCF_MAX_PAIRS,
) -> MatchedGroups:
    """Full matching for one stratum given its treated x control distances.

    Uses the exact min-cost-flow solver when the distance matrix has at
    most `mcf_max_pairs` entries (the flow encodes the degree lower bounds;
    `max_set_size`, when given, caps units per set), and the greedy
    nearest-anchor construction beyond that. Without an explicit cap the
    greedy engine still bounds sets at twice the balanced size.
    """
    dist = np.asarray(dist, dtype=np.float64)
    treated_ids = np.asarray(treated_ids, dtype=np.int64)
    control_ids = np.asarray(control_ids, dtype=np.int64)
    m, g = dist.shape
    if m == 0 or g == 0:
        raise ValueError("need at least one treated and one control unit")
    if (m, g) != (treated_ids.size, control_ids.size):
        raise ValueError("distance matrix shape must match the id lists")
    if np.any(dist < 0) or not np.all(np.isfinite(dist)):
        raise ValueError("distances must be finite and nonnegative")
    if max_set_size is not None and max_set_size < 2:
        raise ValueError("max_set_size must allow one of each side")
    if m * g <= mcf_max_pairs:
        return _full_match_mcf(dist, treated_ids, control_ids, max_set_size)
    return _full_match_greedy(dist, treated_ids, control_ids, max_set_size)


def matched_sets_estimate(groups_list: list[MatchedGroups], y: np.ndarray) -> float:
    """Set-size-weighted mean of within-set treated-minus-control outcomes."""
    num = 0.0
    den = 0.0
    for groups in groups_list:
        for treated, controls in groups.sets:
            diff = float(np.mean(y[list(treated)]) - np.mean(y[list(controls)]))
            weight = len(treated) + len(controls)
            num += weight * diff
            den += weight
    if den == 0:
        raise ValueError("no matched sets")
    return num / den
