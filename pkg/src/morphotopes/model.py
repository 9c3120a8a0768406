"""Core domain types.

Geometries are shapely objects in a projected CRS (metres).  Identifiers
are dense integers starting at zero within each collection; downstream
stages rely on that density, so loaders and preprocessing re-number
whenever they add or remove elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString, Polygon

NOISE = -1


@dataclass
class Footprint:
    id: int
    polygon: Polygon


@dataclass
class Segment:
    id: int
    line: LineString
    kind: str = "unclassified"
    tunnel: bool = False


@dataclass
class Cell:
    """One tessellation cell: the spatial extent assigned to a footprint."""

    id: int
    polygon: Polygon
    footprint_id: int
    enclosure_id: int
    segment_id: int = -1
    node_id: int = -1


@dataclass
class Dendrogram:
    """Agglomeration record over ``n_leaves`` observations.

    ``merges`` has one row per merge: (child_a, child_b, height, size)
    where children are prior cluster ids (leaves are 0..n_leaves-1, the
    i-th merge creates id n_leaves+i), height is the merge height and
    size the member count of the new cluster.  Heights may have
    inversions when the agglomeration was contiguity constrained, so
    order-sensitive consumers go by merge order, not height.  A full
    tree has n_leaves-1 merges; a forest (disconnected constraint
    graph) has fewer.
    """

    n_leaves: int
    merges: np.ndarray  # shape (m, 4), float64

    def __post_init__(self) -> None:
        self.merges = np.asarray(self.merges, dtype=float).reshape(-1, 4)
        if self.n_leaves < 1:
            raise ValueError("dendrogram needs at least one leaf")
        if len(self.merges) > self.n_leaves - 1:
            raise ValueError("more merges than n_leaves - 1")

    @property
    def n_merges(self) -> int:
        return len(self.merges)

    def roots(self) -> list[int]:
        """Cluster ids that are never a child of a later merge."""
        children = set()
        for row in self.merges:
            children.add(int(row[0]))
            children.add(int(row[1]))
        total = self.n_leaves + self.n_merges
        return [i for i in range(total) if i not in children]

    def members(self) -> list[list[int]]:
        """Leaf members of every cluster id, leaves included."""
        out: list[list[int]] = [[i] for i in range(self.n_leaves)]
        for row in self.merges:
            a, b = int(row[0]), int(row[1])
            out.append(out[a] + out[b])
        return out

    def to_linkage(self) -> np.ndarray:
        """Scipy-style linkage matrix; requires a single tree."""
        if self.n_merges != self.n_leaves - 1:
            raise ValueError("forest dendrogram has no linkage form")
        return self.merges.copy()


@dataclass
class MorphotopeExtras:
    """Morphotope-level characters computed from merged structures."""

    likely_occupied: int
    area_top10: float
    perim_top10: float


@dataclass
class Standardizer:
    """Column-wise z-score parameters frozen on one profile table.

    Columns with zero spread map to zero so that constant features do
    not blow up distances for later (pseudo-)profiles.
    """

    columns: list[str]
    mean: np.ndarray
    std: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        safe = np.where(self.std > 0, self.std, 1.0)
        z = (values - self.mean) / safe
        z[..., self.std == 0] = 0.0
        return z


@dataclass
class TaxonomyTree:
    """Hierarchy over kept morphotope profiles.

    ``dendrogram`` leaves are positions 0..n-1 into ``morphotope_ids``
    (the kept, non-outlier morphotope labels in ascending order).
    """

    dendrogram: Dendrogram
    morphotope_ids: list[int]
    standardizer: Standardizer
    profiles_z: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
