"""Footprint and street cleaning ahead of tessellation.

Buildings: simplify, drop non-building giants, merge overlaps, then a
final hygiene pass that snaps near-touching walls and fills sliver
holes.  Streets: keep only kinds that structure urban space, drop
tunnels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import shapely
from shapely.geometry.polygon import Polygon, orient
from shapely.ops import snap, unary_union
from shapely.strtree import STRtree

from .config import PreprocessConfig
from .model import Footprint, Segment

log = logging.getLogger(__name__)

# Street kinds that bound enclosures.  Service roads, footways, tracks
# and the like are deliberately absent: they subdivide space below the
# block scale.
SEGMENT_KINDS = frozenset(
    {
        "living_street",
        "motorway",
        "motorway_link",
        "pedestrian",
        "primary",
        "primary_link",
        "residential",
        "secondary",
        "secondary_link",
        "tertiary",
        "tertiary_link",
        "trunk",
        "trunk_link",
        "unclassified",
    }
)


@dataclass
class PreprocessReport:
    merged_pairs: int = 0
    dropped_large: int = 0
    filtered_segments: int = 0
    snapped_gaps: int = 0


def _merge_pass(polys: list[Polygon], groups: list[list[int]], cfg: PreprocessConfig) -> bool:
    """One fixpoint iteration of overlap merging; True if anything merged.

    Candidate pairs are processed in ascending (min id, max id) order of
    the original footprint ids so the result does not depend on STRtree
    internals.
    """
    tree = STRtree(polys)
    a_idx, b_idx = tree.query(polys, predicate="intersects")
    pairs = []
    for i, j in zip(a_idx.tolist(), b_idx.tolist()):
        if i >= j:
            continue
        key = (min(groups[i][0], groups[j][0]), max(groups[i][0], groups[j][0]))
        pairs.append((key, i, j))
    pairs.sort()

    merged_into: dict[int, int] = {}

    def resolve(i: int) -> int:
        while i in merged_into:
            i = merged_into[i]
        return i

    changed = False
    for _, i, j in pairs:
        ri, rj = resolve(i), resolve(j)
        if ri == rj:
            continue
        pi, pj = polys[ri], polys[rj]
        inter = pi.intersection(pj).area
        if inter <= 0:
            continue
        small = min(pi.area, pj.area)
        if inter >= cfg.merge_overlap_frac * small or small < cfg.merge_small_area:
            union = unary_union([pi, pj])
            if union.geom_type != "Polygon":
                union = max(
                    (g for g in union.geoms if g.geom_type == "Polygon"),
                    key=lambda g: g.area,
                )
            keep, drop = (ri, rj) if groups[ri][0] < groups[rj][0] else (rj, ri)
            polys[keep] = union
            groups[keep] = sorted(groups[keep] + groups[drop])
            merged_into[drop] = keep
            changed = True

    if changed:
        keep_idx = [i for i in range(len(polys)) if i not in merged_into]
        polys[:] = [polys[i] for i in keep_idx]
        groups[:] = [groups[i] for i in keep_idx]
    return changed


def _fill_sliver_holes(poly: Polygon, gap_area: float) -> tuple[Polygon, int]:
    holes = [r for r in poly.interiors if Polygon(r).area >= gap_area]
    filled = len(poly.interiors) - len(holes)
    if filled:
        poly = Polygon(poly.exterior, holes)
    return poly, filled


def preprocess_buildings(
    blds: list[Footprint], cfg: PreprocessConfig | None = None
) -> tuple[list[Footprint], PreprocessReport]:
    """Clean footprints; returns new dense-id footprints plus counts.

    Steps, in order: simplify outlines (topology preserving), drop
    polygons larger than ``max_building_area``, merge overlapping pairs
    (overlap at least ``merge_overlap_frac`` of the smaller area, or the
    smaller member under ``merge_small_area``) to a fixpoint, snap
    near-touching neighbours and fill holes below ``gap_area``.
    Running the function on its own output is a no-op.
    """
    cfg = cfg or PreprocessConfig()
    report = PreprocessReport()

    polys: list[Polygon] = []
    groups: list[list[int]] = []
    for b in blds:
        poly = b.polygon.simplify(cfg.simplify_tol, preserve_topology=True)
        if poly.is_empty or poly.area == 0:
            continue
        if poly.area > cfg.max_building_area:
            report.dropped_large += 1
            continue
        polys.append(poly)
        groups.append([b.id])

    before = len(polys)
    while _merge_pass(polys, groups, cfg):
        pass
    report.merged_pairs = before - len(polys)

    # Hygiene pass: snap almost-touching walls, fill sliver holes.
    snap_tol = max(cfg.gap_area ** 0.5, 1e-6)
    if polys:
        tree = STRtree(polys)
        a_idx, b_idx = tree.query(polys, predicate="dwithin", distance=snap_tol)
        near = sorted(
            (i, j) for i, j in zip(a_idx.tolist(), b_idx.tolist()) if i < j
        )
        for i, j in near:
            if polys[i].distance(polys[j]) > 0:
                snapped = snap(polys[i], polys[j], snap_tol)
                if snapped.geom_type == "Polygon" and snapped.is_valid and snapped.area > 0:
                    polys[i] = snapped
                    report.snapped_gaps += 1
    for k in range(len(polys)):
        polys[k], filled = _fill_sliver_holes(polys[k], cfg.gap_area)
        report.snapped_gaps += filled

    order = sorted(range(len(polys)), key=lambda k: groups[k][0])
    out = [Footprint(id=new, polygon=orient(polys[k], sign=1.0)) for new, k in enumerate(order)]
    return out, report


def building_adjacency(
    blds: list[Footprint], tol: float = 0.5
) -> list[tuple[int, int]]:
    """Pairs of footprints within ``tol`` metres of each other.

    Symmetric, irreflexive; each unordered pair appears once as
    (smaller id, larger id), sorted.
    """
    if not blds:
        return []
    geoms = [b.polygon for b in blds]
    ids = [b.id for b in blds]
    tree = STRtree(geoms)
    a_idx, b_idx = tree.query(geoms, predicate="dwithin", distance=tol)
    pairs = {
        (min(ids[i], ids[j]), max(ids[i], ids[j]))
        for i, j in zip(a_idx.tolist(), b_idx.tolist())
        if i != j
    }
    return sorted(pairs)


def filter_segments(
    segs: list[Segment], kinds: frozenset[str] = SEGMENT_KINDS
) -> tuple[list[Segment], PreprocessReport]:
    """Keep surface streets of the whitelisted kinds; re-number densely."""
    report = PreprocessReport()
    kept: list[Segment] = []
    for s in segs:
        if s.tunnel or s.kind not in kinds:
            report.filtered_segments += 1
            continue
        kept.append(Segment(id=len(kept), line=s.line, kind=s.kind, tunnel=False))
    if report.filtered_segments:
        log.info("filtered %d street segments", report.filtered_segments)
    return kept, report
