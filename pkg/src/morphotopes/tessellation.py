"""Enclosed tessellation and the street graph.

Street segments are noded (split at crossings) and polygonised into
enclosures: the faces of the street arrangement, plus the leftover
border region clipped to a padded bounding box.  Within each enclosure
every footprint claims the area closer to it than to any other
footprint (a Voronoi diagram seeded with densified boundary points),
clipped to a per-building distance band so isolated buildings do not
absorb entire fields.

The band is adaptive: a building's reach is 1.1 times the largest gap
to its first-pass tessellation neighbours, so dense fabric keeps tight
cells while open fabric keeps context, with a fixed default for
buildings that have no neighbour at all.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import networkx as nx
import shapely
from scipy.spatial import Voronoi
from shapely.geometry import LineString, MultiPolygon, Point, Polygon, box
from shapely.ops import polygonize, unary_union
from shapely.strtree import STRtree

from .config import TessellationConfig
from .model import Cell, Footprint, Segment

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# street graph


@dataclass
class StreetGraph:
    """Noded street segments plus their incidence structure."""

    segments: list[Segment]
    nodes: list[Point]
    graph: nx.MultiGraph  # nodes: node ids, edges keyed by segment id


def _round_key(xy: tuple[float, float]) -> tuple[float, float]:
    return (round(xy[0], 9), round(xy[1], 9))


def node_streets(segments: list[Segment]) -> StreetGraph:
    """Split segments at every crossing and index the result as a graph.

    Output segment ids are fresh and dense; nodes sit at the endpoints
    of the noded pieces (junctions and dead ends alike).  Parallel
    edges and self loops are preserved.
    """
    if not segments:
        return StreetGraph([], [], nx.MultiGraph())
    merged = unary_union([s.line for s in segments])
    pieces: list[LineString] = []
    if merged.geom_type == "LineString":
        pieces = [merged]
    else:
        pieces = [g for g in merged.geoms if g.geom_type == "LineString" and g.length > 0]
    pieces.sort(key=lambda ln: tuple(np.round(np.asarray(ln.coords), 9).ravel()))
    return graph_from_noded([Segment(id=i, line=ln) for i, ln in enumerate(pieces)])


def graph_from_noded(segments: list[Segment]) -> StreetGraph:
    """Index already-noded segments as a graph, keeping their ids.

    Node ids are assigned in segment id order, so rebuilding from a
    persisted noded layer reproduces the original graph exactly.
    """
    node_ids: dict[tuple[float, float], int] = {}
    nodes: list[Point] = []
    graph = nx.MultiGraph()
    for seg in sorted(segments, key=lambda s: s.id):
        ends = []
        for xy in (seg.line.coords[0], seg.line.coords[-1]):
            key = _round_key((xy[0], xy[1]))
            if key not in node_ids:
                node_ids[key] = len(nodes)
                nodes.append(Point(key))
                graph.add_node(node_ids[key])
            ends.append(node_ids[key])
        graph.add_edge(ends[0], ends[1], key=seg.id, segment_id=seg.id, length=seg.line.length)
    return StreetGraph(sorted(segments, key=lambda s: s.id), nodes, graph)


# ---------------------------------------------------------------------------
# enclosures


def build_enclosures(
    segments: list[Segment],
    footprints: list[Footprint],
    pad: float,
) -> list[Polygon]:
    """Faces of the street arrangement inside a padded bounding box.

    The box pads the joint extent of streets and footprints so border
    buildings keep room for their cells; the unbounded face of the
    arrangement becomes one or more border enclosures clipped to it.
    Enclosure ids follow a fixed geometric sort so they are stable for
    identical inputs.
    """
    geoms = [s.line for s in segments] + [f.polygon for f in footprints]
    if not geoms:
        raise ValueError("no geometry to enclose")
    minx, miny, maxx, maxy = shapely.total_bounds(np.array(geoms, dtype=object))
    frame = box(minx - pad, miny - pad, maxx + pad, maxy + pad)
    parts = [s.line for s in segments] + [frame.boundary]
    faces = [p for p in polygonize(unary_union(parts)) if p.area > 0]
    faces = [p.intersection(frame) for p in faces]
    faces = [p for p in faces if not p.is_empty and p.area > 0]
    faces.sort(key=lambda p: (*np.round(p.bounds, 6), round(p.area, 6)))
    return faces


# ---------------------------------------------------------------------------
# voronoi within one enclosure


def _seed_points(
    poly: Polygon, shrink: float, step: float
) -> np.ndarray:
    """Densified boundary points of a footprint, pulled inward.

    The inward shrink keeps seeds of touching footprints apart; if the
    shrink swallows the polygon the original outline is used.
    """
    inner = poly.buffer(-shrink)
    if inner.is_empty or inner.area <= 0:
        inner = poly
    dense = shapely.segmentize(inner.boundary, step)
    return shapely.get_coordinates(dense)


def _voronoi_regions(
    pts: np.ndarray, owners: np.ndarray, extent: tuple[float, float, float, float]
) -> dict[int, Polygon]:
    """Dissolved Voronoi region per owner id.

    Four guard points far outside the extent bound every real region.
    """
    minx, miny, maxx, maxy = extent
    cx, cy = (minx + maxx) / 2, (miny + maxy) / 2
    half = max(maxx - minx, maxy - miny, 1.0) * 100
    guards = np.array(
        [[cx - half, cy - half], [cx - half, cy + half], [cx + half, cy - half], [cx + half, cy + half]]
    )
    vor = Voronoi(np.vstack([pts, guards]))
    polys: dict[int, list[Polygon]] = {}
    for i in range(len(pts)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise RuntimeError("unbounded voronoi region for a seed point")
        polys.setdefault(int(owners[i]), []).append(Polygon(vor.vertices[region]))
    return {owner: unary_union(group) for owner, group in polys.items()}


def _dedupe(pts: np.ndarray, owners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rounded = np.round(pts, 6)
    _, keep = np.unique(rounded, axis=0, return_index=True)
    keep.sort()
    return pts[keep], owners[keep]


def _tessellate_enclosure(
    enclosure: Polygon,
    blds: list[Footprint],
    cfg: TessellationConfig,
) -> dict[int, shapely.Geometry]:
    """Unclipped (no distance band) cell geometry per footprint id."""
    if not blds:
        return {}
    if len(blds) == 1:
        return {blds[0].id: enclosure}
    pts_list, owner_list = [], []
    for b in blds:
        pts = _seed_points(b.polygon, cfg.seed_shrink, cfg.segment_step)
        pts_list.append(pts)
        owner_list.append(np.full(len(pts), b.id))
    pts = np.vstack(pts_list)
    owners = np.concatenate(owner_list)
    pts, owners = _dedupe(pts, owners)
    regions = _voronoi_regions(pts, owners, enclosure.bounds)
    out: dict[int, shapely.Geometry] = {}
    for b in blds:
        region = regions.get(b.id)
        if region is None:
            log.warning("footprint %d lost all seed points; using buffer fallback", b.id)
            region = b.polygon.buffer(cfg.default_bandwidth)
        out[b.id] = region.intersection(enclosure)
    return out


# ---------------------------------------------------------------------------
# full tessellation


def _assign_enclosures(
    blds: list[Footprint], enclosures: list[Polygon]
) -> dict[int, list[Footprint]]:
    """Footprint lists per enclosure id, by representative point."""
    tree = STRtree(enclosures)
    assignment: dict[int, list[Footprint]] = {}
    for b in blds:
        rep = b.polygon.representative_point()
        hits = tree.query(rep, predicate="within")
        if len(hits) == 0:
            # on an enclosure edge; fall back to nearest
            hits = [tree.nearest(rep)]
        enc = int(min(hits))
        assignment.setdefault(enc, []).append(b)
    return assignment


def _first_pass_cells(
    blds: list[Footprint],
    enclosures: list[Polygon],
    cfg: TessellationConfig,
) -> tuple[dict[int, shapely.Geometry], dict[int, int]]:
    assignment = _assign_enclosures(blds, enclosures)
    cells: dict[int, shapely.Geometry] = {}
    enc_of: dict[int, int] = {}
    for enc_id in sorted(assignment):
        group = assignment[enc_id]
        for fid, geom in _tessellate_enclosure(enclosures[enc_id], group, cfg).items():
            cells[fid] = geom
            enc_of[fid] = enc_id
    return cells, enc_of


def compute_bandwidths(
    blds: list[Footprint],
    first_pass: dict[int, shapely.Geometry],
    cfg: TessellationConfig,
) -> dict[int, float]:
    """Adaptive clipping radius per footprint.

    1.1 times the largest footprint-to-footprint distance among
    first-pass cell neighbours; the default radius when a building has
    no neighbour; never below the configured floor.
    """
    ids = sorted(first_pass)
    geoms = [first_pass[i] for i in ids]
    tree = STRtree(geoms)
    a_idx, b_idx = tree.query(geoms, predicate="intersects")
    by_fp: dict[int, set[int]] = {i: set() for i in ids}
    for i, j in zip(a_idx.tolist(), b_idx.tolist()):
        if i != j:
            by_fp[ids[i]].add(ids[j])
    poly = {b.id: b.polygon for b in blds}
    out: dict[int, float] = {}
    for fid in ids:
        neigh = by_fp[fid]
        if not neigh:
            r = cfg.default_bandwidth
        else:
            r = cfg.bandwidth_factor * max(poly[fid].distance(poly[n]) for n in neigh)
        out[fid] = max(r, cfg.min_bandwidth)
    return out


def tessellate(
    blds: list[Footprint],
    segments: list[Segment],
    cfg: TessellationConfig | None = None,
) -> tuple[list[Cell], list[Polygon], dict[int, float]]:
    """Enclosed tessellation of the scene.

    Returns (cells, enclosures, bandwidths).  Cell ids equal footprint
    ids; every cell contains its footprint's interior, cells do not
    overlap, and each is limited to its enclosure and its distance
    band.
    """
    cfg = cfg or TessellationConfig()
    if not blds:
        raise ValueError("no footprints to tessellate")
    pad = 2 * cfg.default_bandwidth
    enclosures = build_enclosures(segments, blds, pad)
    first, enc_of = _first_pass_cells(blds, enclosures, cfg)
    radii = compute_bandwidths(blds, first, cfg)
    max_r = max(radii.values())
    if max_r > pad:
        # border buildings need more room than the initial frame gave
        pad = 1.2 * max_r
        enclosures = build_enclosures(segments, blds, pad)
        first, enc_of = _first_pass_cells(blds, enclosures, cfg)
        radii = compute_bandwidths(blds, first, cfg)

    fp_geoms = [b.polygon for b in blds]
    fp_tree = STRtree(fp_geoms)
    cells: list[Cell] = []
    for b in sorted(blds, key=lambda x: x.id):
        region = first[b.id]
        near = fp_tree.query(region, predicate="intersects")
        others = [fp_geoms[k] for k in near if blds[k].id != b.id]
        if others:
            region = region.difference(unary_union(others))
        band = b.polygon.buffer(radii[b.id])
        geom = region.intersection(band)
        geom = geom.union(b.polygon.intersection(enclosures[enc_of[b.id]]))
        geom = _polygonal(geom)
        if geom.is_empty:
            log.warning("cell of footprint %d collapsed; using distance-band fallback", b.id)
            geom = _polygonal(band.intersection(enclosures[enc_of[b.id]]))
        cells.append(
            Cell(id=b.id, polygon=geom, footprint_id=b.id, enclosure_id=enc_of[b.id])
        )
    return cells, enclosures, radii


def _polygonal(geom) -> shapely.Geometry:
    """Strip points/lines a boolean op may have left behind."""
    if geom.is_empty or geom.geom_type in ("Polygon", "MultiPolygon"):
        return geom
    parts = [g for g in getattr(geom, "geoms", []) if g.geom_type in ("Polygon", "MultiPolygon")]
    if not parts:
        return Polygon()
    return unary_union(parts)


# ---------------------------------------------------------------------------
# adjacency and street assignment


def cell_adjacency(cells: list[Cell]) -> list[tuple[int, int]]:
    """Queen contiguity: cells sharing at least a boundary point."""
    ids = [c.id for c in cells]
    geoms = [c.polygon for c in cells]
    tree = STRtree(geoms)
    a_idx, b_idx = tree.query(geoms, predicate="intersects")
    pairs = {
        (min(ids[i], ids[j]), max(ids[i], ids[j]))
        for i, j in zip(a_idx.tolist(), b_idx.tolist())
        if i != j
    }
    return sorted(pairs)


def assign_streets(
    cells: list[Cell],
    blds: list[Footprint],
    streets: StreetGraph,
) -> None:
    """Link every cell to its nearest street segment and node, in place.

    Nearness is measured from the footprint centroid; ties break to the
    smaller segment id, then the nearer endpoint (smaller node id on an
    exact tie) so results never depend on index order.
    """
    if not streets.segments:
        return
    lines = [s.line for s in streets.segments]
    tree = STRtree(lines)
    node_at = {_round_key((p.x, p.y)): i for i, p in enumerate(streets.nodes)}
    seg_nodes = [
        (
            node_at[_round_key(s.line.coords[0][:2])],
            node_at[_round_key(s.line.coords[-1][:2])],
        )
        for s in streets.segments
    ]
    poly = {b.id: b.polygon for b in blds}
    for cell in cells:
        c = poly[cell.footprint_id].centroid
        nearest = int(tree.nearest(c))
        d = c.distance(lines[nearest])
        candidates = tree.query(c.buffer(d + 1e-9), predicate="intersects").tolist()
        if not candidates:
            candidates = [nearest]
        best = min((round(c.distance(lines[k]), 9), k) for k in candidates)[1]
        cell.segment_id = best
        na, nb = seg_nodes[best]
        da = c.distance(Point(lines[best].coords[0]))
        db = c.distance(Point(lines[best].coords[-1]))
        if abs(da - db) < 1e-12:
            cell.node_id = min(na, nb)
        else:
            cell.node_id = na if da < db else nb


def enclosure_of_cells(cells: list[Cell]) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for c in cells:
        out.setdefault(c.enclosure_id, []).append(c.id)
    return out
