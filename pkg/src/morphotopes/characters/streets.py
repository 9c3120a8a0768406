"""Street-segment characters: profile, length, linearity, load.

The profile walks each segment, casting a perpendicular section every
``step`` metres.  Each side of a section runs until it hits a building
or gives up at ``cap`` metres, the open-street perception limit.
"""

from __future__ import annotations

import math

import numpy as np
from shapely.geometry import LineString, Polygon
from shapely.strtree import STRtree

from .shape import linearity


def _section_points(line: LineString, step: float) -> np.ndarray:
    """Measurement stations along the line; midpoint for short lines."""
    if line.length <= step:
        return np.array([line.length / 2.0])
    return np.arange(step, line.length, step)


def _ray_hit(p, ray: LineString, tree: STRtree, geoms: list[Polygon], cap: float) -> float | None:
    """Distance from p to the first footprint along the ray, None if open."""
    best = None
    for k in tree.query(ray, predicate="intersects").tolist():
        inter = ray.intersection(geoms[k])
        if inter.is_empty:
            continue
        d = p.distance(inter)
        if best is None or d < best:
            best = d
    if best is not None and best <= cap:
        return best
    return None


def street_profile(
    line: LineString,
    tree: STRtree,
    geoms: list[Polygon],
    step: float = 3.0,
    cap: float = 50.0,
) -> tuple[float, float, float]:
    """(mean width, openness, width deviation) of one street segment.

    Width of a section is the sum of both side reaches (each capped);
    openness is the share of side rays that hit nothing; deviation is
    the population standard deviation of section widths.
    """
    stations = _section_points(line, step)
    widths = []
    hits = 0
    for t in stations:
        p = line.interpolate(float(t))
        before = line.interpolate(max(float(t) - 0.5, 0.0))
        after = line.interpolate(min(float(t) + 0.5, line.length))
        dx, dy = after.x - before.x, after.y - before.y
        norm = math.hypot(dx, dy)
        if norm == 0:
            widths.append(2 * cap)
            continue
        nx, ny = -dy / norm, dx / norm
        width = 0.0
        for sign in (1.0, -1.0):
            ray = LineString(
                [(p.x, p.y), (p.x + sign * nx * cap, p.y + sign * ny * cap)]
            )
            d = _ray_hit(p, ray, tree, geoms, cap)
            if d is None:
                width += cap
            else:
                width += d
                hits += 1
        widths.append(width)
    arr = np.asarray(widths)
    openness = 1.0 - hits / (2.0 * len(stations))
    return float(arr.mean()), float(openness), float(arr.std())


def segment_scalars(line: LineString) -> tuple[float, float]:
    """(length, linearity)."""
    return float(line.length), linearity(line)
