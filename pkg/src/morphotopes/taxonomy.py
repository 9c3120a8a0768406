"""Hierarchy over morphotopes.

Morphotopes are summarised by the median of each character over their
member cells plus three structure-level measures.  After demoting
profiles that look like cadastre faults, the remainder are standardised
and agglomerated with Ward linkage restricted to a 10-nearest-neighbour
graph in feature space.  Flat cuts of the resulting tree give the
classification levels; noise cells are attached to branches afterwards
by feature-space proximity.
"""

from __future__ import annotations

from collections import Counter

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree
from shapely.ops import unary_union

from .characters.context import adjacency_components, pairs_to_adj
from .characters.shape import elongation, interior_ring_count
from .characters.table import COLUMNS
from .config import TaxonomyConfig
from .model import NOISE, Dendrogram, MorphotopeExtras, Standardizer, TaxonomyTree
from .regionalize import constrained_ward

EXTRA_COLS = ["likely_occupied", "area_top10", "perim_top10", "member_count"]
# perim_top10 flags outliers but does not enter the clustering space
CLUSTER_FEATURES = COLUMNS + ["likely_occupied", "area_top10"]


def morphotope_extras(
    member_ids: list[int],
    fp: dict[int, object],
    bld_adj: dict[int, set[int]],
) -> MorphotopeExtras:
    """Structure-level measures of one morphotope.

    Connected structures are the components of the building adjacency
    graph restricted to the members, each dissolved to one footprint.
    The occupancy flag trips when over 40% of the courtyard-free
    built-up area sits in blocky structures (facade ratio above four,
    elongation under 0.9).
    """
    comps = adjacency_components(bld_adj, member_ids)
    unions = [unary_union([fp[i] for i in comp]) for comp in comps]
    denom = 0.0
    num = 0.0
    for u in unions:
        if interior_ring_count(u) > 0:
            continue
        denom += u.area
        if u.length > 0 and (u.area / u.length) > 4.0 and elongation(u) < 0.9:
            num += u.area
    loa = 1 if denom > 0 and num / denom > 0.4 else 0
    order = sorted(range(len(unions)), key=lambda k: (-unions[k].area, comps[k][0]))
    top = order[:10]
    return MorphotopeExtras(
        likely_occupied=loa,
        area_top10=float(sum(unions[k].area for k in top)),
        perim_top10=float(sum(unions[k].length for k in top)),
    )


def profile_morphotopes(
    labels: pd.Series,
    table: pd.DataFrame,
    fp: dict[int, object],
    bld_adj_pairs: list[tuple[int, int]],
) -> pd.DataFrame:
    """Median profile per morphotope, extras attached.

    Index: morphotope label; columns: the 59 characters plus
    likely_occupied, area_top10, perim_top10 and member_count.
    """
    bld_adj = pairs_to_adj(bld_adj_pairs, list(labels.index))
    rows = {}
    for lab in sorted(labels[labels != NOISE].unique()):
        members = sorted(labels.index[labels == lab])
        med = table.loc[members].median()
        extras = morphotope_extras(members, fp, bld_adj)
        row = med.to_dict()
        row["likely_occupied"] = float(extras.likely_occupied)
        row["area_top10"] = extras.area_top10
        row["perim_top10"] = extras.perim_top10
        row["member_count"] = float(len(members))
        rows[int(lab)] = row
    df = pd.DataFrame.from_dict(rows, orient="index")
    df.index.name = "morphotope_id"
    return df[COLUMNS + EXTRA_COLS]


def exclude_outliers(
    profiles: pd.DataFrame, cfg: TaxonomyConfig | None = None
) -> tuple[pd.DataFrame, list[int]]:
    """Split profiles into kept and demoted-to-noise.

    A profile is demoted when its structures are implausibly large
    (summed top-10 perimeter or area over threshold) or its buildings
    implausibly shaped (tiny median area, kilometre-scale median
    perimeter), both signatures of faulty source polygons, not fabric.
    Idempotent: the kept set passes unchanged through a second call.
    """
    cfg = cfg or TaxonomyConfig()
    bad = (
        (profiles["perim_top10"] > cfg.perim_top10_max)
        | (profiles["area_top10"] > cfg.area_top10_max)
        | (profiles["eq01_area_blg"] < cfg.median_area_min)
        | (profiles["eq02_perimeter_blg"] > cfg.median_perimeter_max)
    )
    kept = profiles[~bad]
    return kept, [int(i) for i in profiles.index[bad]]


def standardize(profiles: pd.DataFrame) -> tuple[np.ndarray, Standardizer]:
    """Z-score the clustering features (population std; flat columns map to 0)."""
    vals = profiles[CLUSTER_FEATURES].to_numpy(dtype=float)
    mean = vals.mean(axis=0)
    std = vals.std(axis=0)
    scaler = Standardizer(columns=list(CLUSTER_FEATURES), mean=mean, std=std)
    return scaler.transform(vals), scaler


def _knn_edges(Z: np.ndarray, k: int) -> list[tuple[int, int]]:
    """Union-symmetrised k-nearest-neighbour pairs in feature space."""
    n = len(Z)
    k = min(k, n - 1)
    if k < 1:
        return []
    tree = cKDTree(Z)
    _, idxs = tree.query(Z, k=min(k + 1, n))
    idxs = np.atleast_2d(idxs)
    edges = set()
    for i in range(n):
        others = [int(j) for j in idxs[i] if int(j) != i][:k]
        for j in others:
            edges.add((min(i, j), max(i, j)))
    return sorted(edges)


def _join_forest(dend: Dendrogram, Z: np.ndarray) -> Dendrogram:
    """Merge forest roots into one tree, closest centroids first.

    Heights continue from the top of the forest and never decrease, so
    flat cuts behave as if the tree were grown in one piece.
    """
    roots = dend.roots()
    if len(roots) <= 1:
        return dend
    members = dend.members()
    merges = [tuple(r) for r in dend.merges]
    last_h = merges[-1][2] if merges else 0.0
    size = {r: len(members[r]) for r in roots}
    centroid = {r: Z[members[r]].mean(axis=0) for r in roots}
    next_id = dend.n_leaves + dend.n_merges
    active = sorted(roots)
    while len(active) > 1:
        best = None
        for i in range(len(active)):
            for j in range(i + 1, len(active)):
                a, b = active[i], active[j]
                d = float(np.linalg.norm(centroid[a] - centroid[b]))
                key = (d, a, b)
                if best is None or key < best:
                    best = key
        _, a, b = best
        sa, sb = size[a], size[b]
        diff = centroid[a] - centroid[b]
        delta = sa * sb / (sa + sb) * float(diff @ diff)
        h = max(last_h, float(np.sqrt(2.0 * delta)))
        last_h = h
        merges.append((float(a), float(b), h, float(sa + sb)))
        size[next_id] = sa + sb
        centroid[next_id] = (sa * centroid[a] + sb * centroid[b]) / (sa + sb)
        active = [x for x in active if x not in (a, b)] + [next_id]
        next_id += 1
    return Dendrogram(n_leaves=dend.n_leaves, merges=np.array(merges).reshape(-1, 4))


def build_taxonomy(
    kept_profiles: pd.DataFrame, cfg: TaxonomyConfig | None = None
) -> TaxonomyTree:
    """Ward tree over kept morphotopes, Ward merges limited to 10-NN pairs."""
    cfg = cfg or TaxonomyConfig()
    if kept_profiles.empty:
        raise ValueError("no profiles to build a taxonomy from")
    ids = [int(i) for i in sorted(kept_profiles.index)]
    ordered = kept_profiles.loc[ids]
    Z, scaler = standardize(ordered)
    edges = _knn_edges(Z, cfg.knn)
    dend = constrained_ward(Z, edges) if len(ids) > 1 else Dendrogram(1, np.empty((0, 4)))
    dend = _join_forest(dend, Z)
    return TaxonomyTree(
        dendrogram=dend, morphotope_ids=ids, standardizer=scaler, profiles_z=Z
    )


def flat_cut(tree: TaxonomyTree, k: int) -> pd.Series:
    """Partition morphotopes into exactly ``k`` branches.

    Undoes the last k-1 merges.  That equals cutting just under the
    k-1 highest heights on a monotone tree, stays well defined when
    constrained Ward produced inversions, and makes cuts at successive
    k nested by construction.  Branches are numbered by their smallest
    member morphotope id.
    """
    dend = tree.dendrogram
    n = dend.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}")
    keep = dend.n_merges - (k - 1)
    if keep < 0:
        raise ValueError(f"tree cannot produce {k} branches")
    sub = Dendrogram(n_leaves=n, merges=dend.merges[:keep])
    members = sub.members()
    groups = sorted((sorted(members[r]) for r in sub.roots()), key=lambda g: g[0])
    out = {}
    for branch, group in enumerate(groups):
        for leaf in group:
            out[tree.morphotope_ids[leaf]] = branch
    return pd.Series(out, name="branch").sort_index()


def assign_noise(
    labels: pd.Series,
    cell_adj_pairs: list[tuple[int, int]],
    table: pd.DataFrame,
    fp: dict[int, object],
    bld_adj_pairs: list[tuple[int, int]],
    tree: TaxonomyTree,
    k: int,
    nn: int = 5,
    discard: bool = False,
) -> pd.Series:
    """Branch labels for noise cells at the ``k``-branch cut.

    Contiguous noise cells form pseudo-morphotopes; each is profiled
    like a real one, standardised with the tree's own scaler, and takes
    the majority branch among its ``nn`` nearest kept morphotopes (a
    tied vote falls to the single nearest).  ``discard`` skips the
    whole step, leaving noise unlabeled.
    """
    noise_ids = sorted(labels.index[labels == NOISE])
    if discard or not noise_ids:
        return pd.Series(dtype=int, name="branch")
    cell_adj = pairs_to_adj(cell_adj_pairs, noise_ids)
    bld_adj = pairs_to_adj(bld_adj_pairs, list(labels.index))
    branches = flat_cut(tree, k)
    kd = cKDTree(tree.profiles_z)
    nn = min(nn, len(tree.morphotope_ids))
    out = {}
    for comp in adjacency_components(cell_adj, noise_ids):
        med = table.loc[comp].median()
        extras = morphotope_extras(comp, fp, bld_adj)
        row = med.to_dict()
        row["likely_occupied"] = float(extras.likely_occupied)
        row["area_top10"] = extras.area_top10
        vec = np.array([row[c] for c in CLUSTER_FEATURES], dtype=float)
        z = tree.standardizer.transform(vec)
        _, idx = kd.query(z, k=nn)
        idx = np.atleast_1d(idx)
        votes = [int(branches[tree.morphotope_ids[int(j)]]) for j in idx]
        counts = Counter(votes)
        top = max(counts.values())
        winners = [b for b, c in counts.items() if c == top]
        chosen = winners[0] if len(winners) == 1 else votes[0]
        for cell in comp:
            out[cell] = chosen
    return pd.Series(out, name="branch").sort_index()


def taxonomy_to_json(tree: TaxonomyTree) -> dict:
    """Nested-dict form of the tree for export."""
    dend = tree.dendrogram
    n = dend.n_leaves

    def node(cid: int) -> dict:
        if cid < n:
            return {"id": cid, "morphotope": tree.morphotope_ids[cid], "size": 1}
        row = dend.merges[cid - n]
        return {
            "id": cid,
            "height": float(row[2]),
            "size": int(row[3]),
            "children": [node(int(row[0])), node(int(row[1]))],
        }

    roots = dend.roots()
    return {
        "n_morphotopes": n,
        "roots": [node(r) for r in roots],
    }
