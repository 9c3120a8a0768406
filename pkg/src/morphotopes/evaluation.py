"""Comparison against external classifications and spatial summaries.

Buildings carry a branch label; an external map carries class polygons.
Point-in-polygon matching on guaranteed-interior points yields a
row-normalised confusion matrix.  The grid summary reports how strongly
each branch is present across a coarse reference grid.
"""

from __future__ import annotations

import math

import pandas as pd
from shapely.geometry import box
from shapely.strtree import STRtree

UNMATCHED = "unmatched"


def cross_tabulate(
    points: dict[int, object],
    branch_labels: pd.Series,
    external: list[tuple[object, str]],
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """(row-normalised matrix, raw counts): branches by external classes.

    ``points`` maps building id to a representative interior point;
    buildings matching no polygon land in the "unmatched" column.
    Overlapping external polygons resolve to the earliest in the list.
    """
    classes = sorted({c for _, c in external})
    geoms = [g for g, _ in external]
    tree = STRtree(geoms) if geoms else None
    branches = sorted(int(b) for b in branch_labels.unique())
    counts = pd.DataFrame(
        0, index=pd.Index(branches, name="branch"), columns=classes + [UNMATCHED]
    )
    for bid in sorted(branch_labels.index):
        p = points[bid]
        label = UNMATCHED
        if tree is not None:
            hits = sorted(int(i) for i in tree.query(p, predicate="within"))
            if hits:
                label = external[hits[0]][1]
        counts.loc[int(branch_labels[bid]), label] += 1
    totals = counts.sum(axis=1)
    norm = counts.div(totals.where(totals > 0, 1), axis=0)
    return norm, counts


def grid_abundance(
    points: dict[int, object],
    branch_labels: pd.Series,
    cell_size: float = 50_000.0,
) -> dict:
    """Branch shares per square grid cell, as a GeoJSON-ready dict.

    The grid is anchored at integer multiples of ``cell_size``, so
    shifting the whole scene by exact multiples relabels cells without
    changing any share.  Each feature carries the building count, the
    per-branch share of the cell, and the share normalised by that
    branch's maximum over all cells.  Empty cells are omitted.
    """
    per_cell: dict[tuple[int, int], dict[int, int]] = {}
    for bid in sorted(branch_labels.index):
        p = points[bid]
        key = (math.floor(p.x / cell_size), math.floor(p.y / cell_size))
        cell = per_cell.setdefault(key, {})
        b = int(branch_labels[bid])
        cell[b] = cell.get(b, 0) + 1
    branches = sorted(int(b) for b in branch_labels.unique())
    max_share = {b: 0.0 for b in branches}
    shares: dict[tuple[int, int], dict[int, float]] = {}
    for key, cell in per_cell.items():
        total = sum(cell.values())
        share = {b: cell.get(b, 0) / total for b in branches}
        shares[key] = share
        for b in branches:
            max_share[b] = max(max_share[b], share[b])
    features = []
    for key in sorted(per_cell):
        ix, iy = key
        geom = box(ix * cell_size, iy * cell_size, (ix + 1) * cell_size, (iy + 1) * cell_size)
        props: dict[str, object] = {
            "ix": ix,
            "iy": iy,
            "count": sum(per_cell[key].values()),
        }
        for b in branches:
            props[f"share_{b}"] = shares[key][b]
            props[f"presence_{b}"] = (
                shares[key][b] / max_share[b] if max_share[b] > 0 else 0.0
            )
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [list(geom.exterior.coords)],
                },
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "features": features}
