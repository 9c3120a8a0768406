"""Morphotope delineation.

Three steps compose: a rank-based quantile transform that puts every
feature on an equal footing, agglomerative Ward clustering restricted
to spatially adjacent clusters, and a sweep over the resulting
dendrogram that extracts the deepest clusters reaching a minimum size.
Cells never absorbed into such a cluster are noise.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .model import NOISE, Dendrogram


def quantile_transform(table: pd.DataFrame) -> pd.DataFrame:
    """Map every column to [0, 1] by average rank.

    value -> (average rank - 1) / (n - 1); ties share their average
    rank, and a constant column maps to 0.5 everywhere.  Monotone
    transformations of a column leave the output unchanged.
    """
    if table.isna().any().any():
        raise ValueError("quantile_transform requires an imputed table")
    n = len(table)
    if n == 1:
        return pd.DataFrame(0.5, index=table.index, columns=table.columns)
    out = {}
    for col in table.columns:
        ranks = rankdata(table[col].to_numpy(), method="average")
        vals = (ranks - 1.0) / (n - 1.0)
        if np.allclose(vals, vals[0]):
            vals = np.full(n, 0.5)
        out[col] = vals
    return pd.DataFrame(out, index=table.index)


def _ward_delta(sa: int, sb: int, ca: np.ndarray, cb: np.ndarray) -> float:
    diff = ca - cb
    return (sa * sb) / (sa + sb) * float(diff @ diff)


def constrained_ward(X: np.ndarray, edges: list[tuple[int, int]]) -> Dendrogram:
    """Ward agglomeration allowing only spatially adjacent merges.

    At every step the adjacent pair with the smallest variance increase
    merges (ties break on the smallest (min id, max id) pair); the new
    cluster inherits the union of both neighbourhoods.  Heights are
    sqrt(2 * increase), which reproduces plain Ward linkage heights
    whenever the graph is complete.

    Unlike unconstrained Ward, heights may show inversions: a merge can
    put a compact cluster in contact with a close outsider it was not
    adjacent to before, so the next height drops.  Consumers must not
    assume monotone heights; cuts here go by merge order instead.

    A disconnected adjacency graph yields a forest: one tree per
    component, never a cross-component merge.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if n == 0:
        raise ValueError("no observations")
    size = {i: 1 for i in range(n)}
    centroid = {i: X[i].copy() for i in range(n)}
    neigh: dict[int, set[int]] = {i: set() for i in range(n)}
    for a, b in edges:
        if a == b:
            continue
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"edge ({a}, {b}) outside 0..{n - 1}")
        neigh[a].add(b)
        neigh[b].add(a)

    heap: list[tuple[float, int, int]] = []
    for a in range(n):
        for b in neigh[a]:
            if a < b:
                heap.append((_ward_delta(1, 1, centroid[a], centroid[b]), a, b))
    heapq.heapify(heap)

    active = set(range(n))
    merges = []
    next_id = n
    while heap:
        delta, a, b = heapq.heappop(heap)
        if a not in active or b not in active:
            continue
        height = math.sqrt(2.0 * max(delta, 0.0))
        new = next_id
        next_id += 1
        sa, sb = size[a], size[b]
        size[new] = sa + sb
        centroid[new] = (sa * centroid[a] + sb * centroid[b]) / (sa + sb)
        merges.append((float(a), float(b), height, float(sa + sb)))
        active.discard(a)
        active.discard(b)
        active.add(new)
        union = (neigh[a] | neigh[b]) - {a, b}
        neigh[new] = set()
        for x in union:
            if x not in active:
                continue
            neigh[x].discard(a)
            neigh[x].discard(b)
            neigh[x].add(new)
            neigh[new].add(x)
            heapq.heappush(
                heap,
                (_ward_delta(size[new], size[x], centroid[new], centroid[x]), min(new, x), max(new, x)),
            )
        del neigh[a], neigh[b]
    return Dendrogram(n_leaves=n, merges=np.array(merges).reshape(-1, 4))


def leaf_extract(dend: Dendrogram, min_size: int) -> np.ndarray:
    """Deepest clusters reaching ``min_size``; everything else is noise.

    Sweep merges from lowest to highest.  A growing cluster is marked
    once it holds at least ``min_size`` leaves.  A marked cluster
    absorbing an unmarked one keeps growing as a single cluster.  When
    two marked clusters meet, both are emitted and the union is closed:
    whatever joins later is noise.  Marked clusters that survive to
    their root are emitted as well.
    """
    if min_size < 2:
        raise ValueError("min_size must be at least 2")
    n = dend.n_leaves
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    marked: dict[int, bool] = {i: False for i in range(n)}
    closed: dict[int, bool] = {i: False for i in range(n)}
    labels = np.full(n, NOISE, dtype=int)
    next_label = 0

    def emit(cluster: int) -> None:
        nonlocal next_label
        if marked[cluster] and not closed[cluster] and members[cluster]:
            labels[np.array(members[cluster])] = next_label
            next_label += 1

    for k, row in enumerate(dend.merges):
        a, b = int(row[0]), int(row[1])
        new = n + k
        if marked[a] and marked[b]:
            emit(a)
            emit(b)
            members[new] = []
            marked[new] = True
            closed[new] = True
        elif marked[a] or marked[b]:
            keep, other = (a, b) if marked[a] else (b, a)
            if closed[keep]:
                # the marked side already dissolved into emitted leaves;
                # late joiners have no cluster to belong to
                members[new] = []
                marked[new] = True
                closed[new] = True
            else:
                members[new] = members[keep] + members[other]
                marked[new] = True
                closed[new] = False
        else:
            members[new] = members[a] + members[b]
            marked[new] = len(members[new]) >= min_size
            closed[new] = False
        for old in (a, b):
            members[old] = []

    for root in dend.roots():
        emit(root)
    return labels


def delineate_morphotopes(
    table: pd.DataFrame,
    adjacency: list[tuple[int, int]],
    min_size: int = 75,
) -> tuple[pd.Series, Dendrogram]:
    """Quantile transform, constrained Ward, leaf extraction, composed.

    ``adjacency`` pairs refer to table index labels.  Returns labels
    (NOISE = -1) and the dendrogram over row positions.  The structural
    guarantees (every morphotope has at least ``min_size`` members and
    is connected) are checked on every run.
    """
    ids = list(table.index)
    pos = {v: k for k, v in enumerate(ids)}
    X = quantile_transform(table).to_numpy()
    edges = [(pos[a], pos[b]) for a, b in adjacency]
    dend = constrained_ward(X, edges)
    lab = leaf_extract(dend, min_size)
    labels = pd.Series(lab, index=table.index, name="label")
    _validate_labels(labels, edges, pos, min_size)
    return labels, dend


def _validate_labels(
    labels: pd.Series, edges: list[tuple[int, int]], pos: dict, min_size: int
) -> None:
    adj: dict[int, set[int]] = {}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    arr = labels.to_numpy()
    for lab in np.unique(arr):
        if lab == NOISE:
            continue
        members = set(np.nonzero(arr == lab)[0])
        if len(members) < min_size:
            raise AssertionError(f"morphotope {lab} smaller than {min_size}")
        start = next(iter(members))
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in adj.get(v, ()):
                if u in members and u not in seen:
                    seen.add(u)
                    queue.append(u)
        if seen != members:
            raise AssertionError(f"morphotope {lab} is not spatially connected")
