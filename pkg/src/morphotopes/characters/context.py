"""Characters of the tessellation neighbourhood and of touching buildings.

Topological distance lives on the queen-contiguity graph of cells.  A
"within distance k" neighbourhood always includes the focal element
itself; counts of explicit neighbours and means of pairwise distances
exclude it.  Adjacent-building structure comes from the building
adjacency graph, with each connected component dissolved into one
built-up structure shared by its members.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from shapely.ops import unary_union

from .shape import (
    circular_compactness,
    elongation,
    equivalent_rectangular_index,
    exterior_perimeter,
    facade_ratio,
    interior_ring_count,
    longest_axis_length,
    square_compactness,
)


def neighbourhood(adj: dict[int, set[int]], start: int, radius: int) -> set[int]:
    """Ids within ``radius`` hops of ``start``, start included."""
    seen = {start}
    frontier = [start]
    for _ in range(radius):
        nxt = []
        for v in frontier:
            for u in adj.get(v, ()):
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        if not nxt:
            break
        frontier = nxt
    return seen


def adjacency_components(adj: dict[int, set[int]], ids: list[int]) -> list[list[int]]:
    """Connected components (sorted members, sorted by first member)."""
    seen: set[int] = set()
    out: list[list[int]] = []
    id_set = set(ids)
    for i in sorted(ids):
        if i in seen:
            continue
        comp = [i]
        seen.add(i)
        queue = deque([i])
        while queue:
            v = queue.popleft()
            for u in adj.get(v, ()):
                if u in id_set and u not in seen:
                    seen.add(u)
                    comp.append(u)
                    queue.append(u)
        out.append(sorted(comp))
    return out


def shared_walls_ratio(polygons: dict[int, object], adj: dict[int, set[int]]) -> dict[int, float]:
    """Share of each footprint's outline touching adjacent footprints.

    The adjacency graph may pair near-touching buildings; only true
    geometric contact contributes length, so a 0.3 m gap neighbour
    adds nothing.
    """
    out = {}
    for i, poly in polygons.items():
        perim = poly.length
        shared = 0.0
        for j in adj.get(i, ()):
            inter = poly.boundary.intersection(polygons[j].boundary)
            if not inter.is_empty:
                shared += inter.length
        out[i] = shared / perim if perim > 0 else float("nan")
    return out


def dissolved_component_chars(
    polygons: dict[int, object], adj: dict[int, set[int]]
) -> dict[int, dict[str, float]]:
    """Characters of each building's connected built-up structure.

    One dissolve per component, values broadcast to every member:
    direct-neighbour count, component area/perimeter, elongation, ERI,
    circular compactness, longest axis, facade ratio, square
    compactness, plus courtyard count and outer wall length.
    """
    out: dict[int, dict[str, float]] = {}
    for comp in adjacency_components(adj, list(polygons)):
        union = unary_union([polygons[i] for i in comp])
        chars = {
            "comp_area": float(union.area),
            "comp_perimeter": float(union.length),
            "comp_elongation": elongation(union),
            "comp_eri": equivalent_rectangular_index(union),
            "comp_cco": circular_compactness(union),
            "comp_lal": longest_axis_length(union),
            "comp_fr": facade_ratio(union),
            "comp_sco": square_compactness(union),
            "comp_courtyards": float(interior_ring_count(union)),
            "comp_ext_perimeter": exterior_perimeter(union),
        }
        for i in comp:
            record = dict(chars)
            record["neighbours"] = float(len(adj.get(i, ())))
            out[i] = record
    return out


def cell_neighbour_chars(
    cell_ids: list[int],
    cell_adj: dict[int, set[int]],
    cell_area: dict[int, float],
    cell_perim: dict[int, float],
    fp_poly: dict[int, object],
    fp_area: dict[int, float],
    bld_adj: dict[int, set[int]],
    enclosure_id: dict[int, int],
) -> dict[int, dict[str, float]]:
    """Order-1 and order-3 neighbourhood characters per cell.

    Cell and footprint ids coincide (one building, one cell).
    """
    out: dict[int, dict[str, float]] = {}
    for i in cell_ids:
        n1 = cell_adj.get(i, set())
        rec: dict[str, float] = {}
        rec["wne"] = len(n1) / cell_perim[i] if cell_perim[i] > 0 else float("nan")
        rec["area_n1"] = cell_area[i] + sum(cell_area[j] for j in n1)
        if n1:
            rec["ndi"] = float(
                np.mean([fp_poly[i].distance(fp_poly[j]) for j in sorted(n1)])
            )
            areas = [fp_area[j] for j in sorted(n1)]
            rec["bad_n1"] = float(np.std(areas))
        else:
            rec["ndi"] = float("nan")
            rec["bad_n1"] = float("nan")

        n3 = neighbourhood(cell_adj, i, 3)
        others = sorted(n3 - {i})
        if others:
            rec["ibd"] = float(np.mean([fp_poly[i].distance(fp_poly[j]) for j in others]))
        else:
            rec["ibd"] = float("nan")
        comps = adjacency_components(bld_adj, sorted(n3))
        rec["bua"] = len(comps) / len(n3)
        area3 = sum(cell_area[j] for j in n3)
        blocks = len({enclosure_id[j] for j in n3})
        rec["wrb"] = blocks / area3 if area3 > 0 else float("nan")
        out[i] = rec
    return out


def pairs_to_adj(pairs: list[tuple[int, int]], ids: list[int]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {i: set() for i in ids}
    for a, b in pairs:
        if a == b:
            continue
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj
