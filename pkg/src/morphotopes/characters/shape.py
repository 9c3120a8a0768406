"""Per-polygon shape measures.

All functions are pure and operate on shapely geometries in a projected
CRS.  Angles are handled unsigned (0..180 degrees), so reflex corners
of concave outlines register like their convex mirror image.
"""

from __future__ import annotations

import math

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon


def courtyard_area(poly: Polygon) -> float:
    return float(sum(Polygon(r).area for r in poly.interiors))


def _vertex_angles(ring) -> np.ndarray:
    """Unsigned angle at every ring vertex, degrees in [0, 180]."""
    pts = np.asarray(ring.coords)[:-1]  # drop closing duplicate
    if len(pts) < 3:
        return np.array([])
    prev = np.roll(pts, 1, axis=0)
    nxt = np.roll(pts, -1, axis=0)
    v1 = prev - pts
    v2 = nxt - pts
    n1 = np.linalg.norm(v1, axis=1)
    n2 = np.linalg.norm(v2, axis=1)
    ok = (n1 > 0) & (n2 > 0)
    cos = np.full(len(pts), -1.0)
    cos[ok] = np.einsum("ij,ij->i", v1[ok], v2[ok]) / (n1[ok] * n2[ok])
    return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))


def corners_and_squareness(poly: Polygon, angle_max: float = 170.0) -> tuple[int, float]:
    """Corner count and mean deviation from a right angle.

    A vertex counts as a corner when the angle between its adjacent
    wall segments is at most ``angle_max`` degrees; near-straight
    vertices are ignored.  Only the exterior outline is considered.
    Squareness is the mean |angle - 90| over the corners (0 when the
    outline has no corner at all).
    """
    angles = _vertex_angles(poly.exterior)
    corners = angles[angles <= angle_max]
    if corners.size == 0:
        return 0, 0.0
    return int(corners.size), float(np.mean(np.abs(corners - 90.0)))


def _mbr_sides(geom) -> tuple[float, float]:
    mbr = shapely.oriented_envelope(geom)
    if mbr.geom_type != "Polygon":
        return 0.0, 0.0
    pts = np.asarray(mbr.exterior.coords)
    d1 = float(np.linalg.norm(pts[1] - pts[0]))
    d2 = float(np.linalg.norm(pts[2] - pts[1]))
    return d1, d2


def elongation(geom) -> float:
    """Shorter over longer side of the minimal rotated rectangle."""
    d1, d2 = _mbr_sides(geom)
    longer = max(d1, d2)
    if longer == 0:
        return 1.0
    return min(d1, d2) / longer


def equivalent_rectangular_index(geom) -> float:
    """Shape complexity against the minimal rotated rectangle."""
    mbr = shapely.oriented_envelope(geom)
    if mbr.area == 0 or geom.length == 0:
        return float("nan")
    return math.sqrt(geom.area / mbr.area) * (mbr.length / geom.length)


def circular_compactness(geom) -> float:
    """Area share of the minimal enclosing circle."""
    r = shapely.minimum_bounding_radius(geom)
    if r == 0:
        return 1.0
    return float(geom.area / (math.pi * r * r))


def longest_axis_length(geom) -> float:
    """Diameter of the minimal enclosing circle."""
    return float(2.0 * shapely.minimum_bounding_radius(geom))


def facade_ratio(geom) -> float:
    if geom.length == 0:
        return float("nan")
    return float(geom.area / geom.length)


def square_compactness(geom) -> float:
    """How close the area/perimeter balance is to a square's."""
    if geom.length == 0:
        return float("nan")
    return float((4.0 * math.sqrt(geom.area) / geom.length) ** 2)


def linearity(line: LineString) -> float:
    """Endpoint chord over curve length; 1 for a straight segment."""
    if line.length == 0:
        return float("nan")
    a = line.coords[0]
    b = line.coords[-1]
    chord = math.dist((a[0], a[1]), (b[0], b[1]))
    return chord / line.length


def exterior_perimeter(geom) -> float:
    """Length of outer boundaries only, holes excluded."""
    if geom.is_empty:
        return 0.0
    if geom.geom_type == "Polygon":
        return float(geom.exterior.length)
    if geom.geom_type == "MultiPolygon":
        return float(sum(p.exterior.length for p in geom.geoms))
    return 0.0


def interior_ring_count(geom) -> int:
    if geom.is_empty:
        return 0
    if geom.geom_type == "Polygon":
        return len(geom.interiors)
    if geom.geom_type == "MultiPolygon":
        return sum(len(p.interiors) for p in geom.geoms)
    return 0


def building_shape_chars(poly: Polygon, angle_max: float = 170.0) -> dict[str, float]:
    """The eight per-footprint shape characters."""
    corners, squ = corners_and_squareness(poly, angle_max)
    return {
        "area": float(poly.area),
        "perimeter": float(poly.length),
        "courtyard_area": courtyard_area(poly),
        "cco": circular_compactness(poly),
        "corners": float(corners),
        "squareness": squ,
        "eri": equivalent_rectangular_index(poly),
        "elongation": elongation(poly),
    }


def cell_shape_chars(geom, building_area: float) -> dict[str, float]:
    """The five per-cell characters; needs the resident building area."""
    area = float(geom.area)
    return {
        "lal": longest_axis_length(geom),
        "area": area,
        "cco": circular_compactness(geom),
        "eri": equivalent_rectangular_index(geom),
        "car": building_area / area if area > 0 else float("nan"),
    }
