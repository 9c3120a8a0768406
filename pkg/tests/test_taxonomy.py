import numpy as np
import pandas as pd
import pytest

from morphotopes.characters.table import COLUMNS
from morphotopes.config import TaxonomyConfig
from morphotopes.model import NOISE, Dendrogram, Standardizer, TaxonomyTree
from morphotopes.taxonomy import (
    CLUSTER_FEATURES,
    EXTRA_COLS,
    assign_noise,
    build_taxonomy,
    exclude_outliers,
    flat_cut,
    morphotope_extras,
    profile_morphotopes,
    standardize,
    taxonomy_to_json,
)
from conftest import rect


def _profiles(centers, per_center=20, jitter=0.01, seed=0):
    """Synthetic morphotope profiles in tight blobs around given centers."""
    rng = np.random.default_rng(seed)
    rows = []
    for c in centers:
        block = np.full((per_center, len(COLUMNS)), float(c))
        block += rng.normal(0, jitter, block.shape)
        rows.append(block)
    X = np.vstack(rows)
    df = pd.DataFrame(X, columns=COLUMNS)
    df["likely_occupied"] = 0.0
    df["area_top10"] = 1000.0 + df[COLUMNS[0]]
    df["perim_top10"] = 400.0
    df["member_count"] = 80.0
    df.index.name = "morphotope_id"
    return df


def test_cluster_features_exclude_perimeter_flag():
    assert len(CLUSTER_FEATURES) == 61
    assert "perim_top10" not in CLUSTER_FEATURES
    assert "member_count" not in CLUSTER_FEATURES
    assert "likely_occupied" in CLUSTER_FEATURES
    assert "area_top10" in CLUSTER_FEATURES


def test_standardize_population_std():
    df = _profiles([0], per_center=2, jitter=0)
    df.loc[0, COLUMNS[0]] = 1.0
    df.loc[1, COLUMNS[0]] = 3.0
    Z, scaler = standardize(df)
    col = CLUSTER_FEATURES.index(COLUMNS[0])
    assert Z[:, col] == pytest.approx([-1.0, 1.0])
    # flat columns map to zero rather than dividing by zero
    flat = CLUSTER_FEATURES.index(COLUMNS[5])
    assert Z[:, flat] == pytest.approx([0.0, 0.0])
    assert scaler.columns == CLUSTER_FEATURES


def test_standardizer_roundtrip_transform():
    df = _profiles([0, 5], per_center=3)
    Z, scaler = standardize(df)
    again = scaler.transform(df[CLUSTER_FEATURES].to_numpy(dtype=float))
    assert np.allclose(Z, again)


def test_flat_cut_blob_purity():
    profiles = _profiles([0, 10, 20])
    tree = build_taxonomy(profiles)
    branches = flat_cut(tree, 3)
    for blob in range(3):
        ids = list(range(blob * 20, (blob + 1) * 20))
        got = set(branches[ids])
        assert len(got) == 1
    assert branches.nunique() == 3


def test_flat_cut_nested():
    profiles = _profiles([0, 5, 10, 15, 20, 25], per_center=8)
    tree = build_taxonomy(profiles)
    cuts = {k: flat_cut(tree, k) for k in (2, 4, 8, 16)}
    for coarse_k, fine_k in [(2, 4), (4, 8), (8, 16)]:
        coarse, fine = cuts[coarse_k], cuts[fine_k]
        # every fine branch maps into exactly one coarse branch
        for b in fine.unique():
            parents = coarse[fine == b].unique()
            assert len(parents) == 1


def test_flat_cut_extremes():
    profiles = _profiles([0, 10], per_center=5)
    tree = build_taxonomy(profiles)
    one = flat_cut(tree, 1)
    assert one.nunique() == 1
    full = flat_cut(tree, 10)
    assert full.nunique() == 10
    with pytest.raises(ValueError):
        flat_cut(tree, 0)
    with pytest.raises(ValueError):
        flat_cut(tree, 11)


def test_flat_cut_branch_numbering():
    profiles = _profiles([0, 50], per_center=4)
    tree = build_taxonomy(profiles)
    branches = flat_cut(tree, 2)
    # branch 0 holds the smallest morphotope id
    assert branches[branches.index.min()] == 0


def test_duplicate_profiles_merge_at_zero_height():
    profiles = _profiles([3, 9], per_center=3, jitter=0)
    tree = build_taxonomy(profiles)
    h = tree.dendrogram.merges[:, 2]
    # identical rows merge first at height zero
    assert h[0] == pytest.approx(0.0, abs=1e-12)
    assert h[1] == pytest.approx(0.0, abs=1e-12)


def test_taxonomy_affine_feature_invariance():
    base = _profiles([0, 10, 20], per_center=6, seed=3)
    scaled = base.copy()
    for j, col in enumerate(CLUSTER_FEATURES):
        scaled[col] = base[col] * (2.0 + j % 5) + 7.0
    t1 = build_taxonomy(base)
    t2 = build_taxonomy(scaled)
    mem1 = t1.dendrogram.members()
    mem2 = t2.dendrogram.members()
    m1 = [tuple(sorted(mem1[t1.dendrogram.n_leaves + k]))
          for k in range(t1.dendrogram.n_merges)]
    m2 = [tuple(sorted(mem2[t2.dendrogram.n_leaves + k]))
          for k in range(t2.dendrogram.n_merges)]
    assert m1 == m2


def test_single_profile_taxonomy():
    profiles = _profiles([0], per_center=1)
    tree = build_taxonomy(profiles)
    assert tree.dendrogram.n_leaves == 1
    assert flat_cut(tree, 1).to_dict() == {0: 0}


def test_exclude_outliers_each_threshold():
    cfg = TaxonomyConfig()
    base = _profiles([1], per_center=5)
    base[COLUMNS[0]] = 100.0   # median building area
    base[COLUMNS[1]] = 40.0    # median building perimeter
    cases = {
        1: ("perim_top10", cfg.perim_top10_max * 2),
        2: ("area_top10", cfg.area_top10_max * 2),
        3: (COLUMNS[0], cfg.median_area_min / 2),
        4: (COLUMNS[1], cfg.median_perimeter_max * 2),
    }
    for i, (col, val) in cases.items():
        base.loc[i, col] = val
    kept, demoted = exclude_outliers(base, cfg)
    assert sorted(demoted) == [1, 2, 3, 4]
    assert list(kept.index) == [0]


def test_exclude_outliers_idempotent_and_order_free():
    base = _profiles([1], per_center=6)
    base[COLUMNS[0]] = 100.0
    base[COLUMNS[1]] = 40.0
    base.loc[2, "area_top10"] = 1e9
    kept, demoted = exclude_outliers(base)
    kept2, demoted2 = exclude_outliers(kept)
    assert demoted == [2] and demoted2 == []
    pd.testing.assert_frame_equal(kept, kept2)
    shuffled = base.sample(frac=1.0, random_state=1)
    kept3, demoted3 = exclude_outliers(shuffled)
    assert sorted(demoted3) == demoted
    assert set(kept3.index) == set(kept.index)


def test_profile_morphotopes_medians_and_extras(two_pattern_run):
    labels = two_pattern_run["labels"]
    table = two_pattern_run["table"]
    fp = {b.id: b.polygon for b in two_pattern_run["blds"]}
    profiles = profile_morphotopes(labels, table, fp, two_pattern_run["bld_pairs"])
    assert list(profiles.columns) == COLUMNS + EXTRA_COLS
    assert (profiles["member_count"] >= two_pattern_run["min_size"]).all()
    lab0 = int(profiles.index[0])
    members = labels.index[labels == lab0]
    assert profiles.loc[lab0, COLUMNS[0]] == pytest.approx(
        table.loc[members, COLUMNS[0]].median()
    )
    assert NOISE not in profiles.index


def test_morphotope_extras_detached_houses():
    fp = {i: rect(20 * i, 0, 8, 8) for i in range(12)}
    extras = morphotope_extras(list(fp), fp, {i: set() for i in fp})
    assert extras.likely_occupied == 0
    # top 10 of 12 identical structures
    assert extras.area_top10 == pytest.approx(10 * 64.0)
    assert extras.perim_top10 == pytest.approx(10 * 32.0)


def test_morphotope_extras_hall_flag():
    # large blocky structures: facade ratio 1200/140 > 4, elongation 0.5
    fp = {i: rect(100 * i, 0, 60, 20) for i in range(3)}
    extras = morphotope_extras(list(fp), fp, {i: set() for i in fp})
    assert extras.likely_occupied == 1


def _hand_tree(values, branch_split):
    """TaxonomyTree over len(values) morphotopes with controlled geometry.

    Each morphotope's z-profile is [v]*59 + [0, extra]; a chain dendrogram
    is built so flat_cut(2) splits at ``branch_split``.
    """
    n = len(values)
    Z = np.zeros((n, 61))
    for i, v in enumerate(values):
        Z[i, :59] = v
        Z[i, 60] = 100.0
    rows = []
    size = {i: 1 for i in range(n)}

    # merge 0..split-1 into one chain, split..n-1 into another, join last
    def chain(ids):
        cur = ids[0]
        for nxt in ids[1:]:
            rows.append((float(cur), float(nxt), 1.0, float(size[cur] + 1)))
            new = n + len(rows) - 1
            size[new] = size[cur] + 1
            cur = new
        return cur

    left = chain(list(range(branch_split)))
    right = chain(list(range(branch_split, n)))
    rows.append((float(left), float(right), 5.0, float(n)))
    dend = Dendrogram(n_leaves=n, merges=np.array(rows))
    scaler = Standardizer(columns=list(CLUSTER_FEATURES), mean=np.zeros(61), std=np.ones(61))
    return TaxonomyTree(
        dendrogram=dend, morphotope_ids=list(range(n)), standardizer=scaler, profiles_z=Z
    )


def _noise_setup(noise_value):
    """One noise cell (id 99) whose table row is constant ``noise_value``."""
    labels = pd.Series({99: NOISE}, name="label")
    table = pd.DataFrame(
        [[float(noise_value)] * len(COLUMNS)],
        index=pd.Index([99], name="cell_id"),
        columns=COLUMNS,
    )
    fp = {99: rect(0, 0, 10, 10)}
    return labels, table, fp


def test_assign_noise_unanimous_vote():
    # five morphotopes at v=0 vs one at v=50; noise profile sits at 0
    tree = _hand_tree([0, 0, 0, 0, 0, 50], branch_split=5)
    labels, table, fp = _noise_setup(0)
    # extras of the 10x10 square: likely_occupied 0, area_top10 100
    out = assign_noise(labels, [], table, fp, [], tree, k=2, nn=5)
    branches = flat_cut(tree, 2)
    assert out[99] == branches[0]
    assert out[99] != branches[5]


def test_assign_noise_tie_goes_to_nearest():
    # two morphotopes per value; nn=4 gives a 2 vs 2 tie
    tree = _hand_tree([0, 0, 6, 6], branch_split=2)
    labels, table, fp = _noise_setup(2)  # nearer the v=0 pair
    out = assign_noise(labels, [], table, fp, [], tree, k=2, nn=4)
    branches = flat_cut(tree, 2)
    assert out[99] == branches[0]


def test_assign_noise_discard():
    tree = _hand_tree([0, 0, 0, 5, 5], branch_split=3)
    labels, table, fp = _noise_setup(0)
    out = assign_noise(labels, [], table, fp, [], tree, k=2, discard=True)
    assert out.empty


def test_assign_noise_components_profile_jointly():
    # two adjacent noise cells: one component, one shared vote
    tree = _hand_tree([0, 0, 0, 50, 50], branch_split=3)
    labels = pd.Series({7: NOISE, 8: NOISE}, name="label")
    table = pd.DataFrame(
        [[0.0] * len(COLUMNS), [0.0] * len(COLUMNS)],
        index=pd.Index([7, 8], name="cell_id"),
        columns=COLUMNS,
    )
    fp = {7: rect(0, 0, 10, 10), 8: rect(30, 0, 10, 10)}
    out = assign_noise(labels, [(7, 8)], table, fp, [], tree, k=2, nn=3)
    assert out[7] == out[8]


def test_assign_noise_no_noise():
    tree = _hand_tree([0, 1], branch_split=1)
    labels = pd.Series({5: 0}, name="label")
    table = pd.DataFrame(
        [[0.0] * len(COLUMNS)], index=pd.Index([5], name="cell_id"), columns=COLUMNS
    )
    out = assign_noise(labels, [], table, {5: rect(0, 0, 1, 1)}, [], tree, k=1)
    assert out.empty


def test_taxonomy_to_json_shape():
    profiles = _profiles([0, 10], per_center=3)
    tree = build_taxonomy(profiles)
    doc = taxonomy_to_json(tree)
    assert doc["n_morphotopes"] == 6
    assert len(doc["roots"]) == 1
    root = doc["roots"][0]
    assert root["size"] == 6
    # every leaf carries its morphotope id
    def leaves(node):
        if "children" not in node:
            return [node["morphotope"]]
        return sum((leaves(c) for c in node["children"]), [])
    assert sorted(leaves(root)) == [0, 1, 2, 3, 4, 5]
