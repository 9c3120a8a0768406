"""GeoJSON and CSV input/output.

Readers normalise raw features into the dense-id domain model; writers
are deterministic (fixed key order, LF line endings, atomic rename) so
that re-running a stage on identical inputs yields byte-identical
artifacts.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd
import shapely
from shapely.geometry import LineString, MultiLineString, Polygon, mapping, shape
from shapely.geometry.polygon import orient

from .model import Cell, Footprint, Segment


class LoadError(ValueError):
    """Raised when an input file cannot be turned into model objects."""


def _features(path: str | Path) -> list[dict]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict) or data.get("type") != "FeatureCollection":
        raise LoadError(f"{path}: expected a GeoJSON FeatureCollection")
    feats = data.get("features", [])
    if not feats:
        raise LoadError(f"{path}: no features")
    return feats


def _polygonal_parts(geom) -> list[Polygon]:
    """Polygon members of any geometry, dropping zero-area debris."""
    parts: list[Polygon] = []
    if geom.is_empty:
        return parts
    if isinstance(geom, Polygon):
        if geom.area > 0:
            parts.append(geom)
    elif hasattr(geom, "geoms"):
        for g in geom.geoms:
            parts.extend(_polygonal_parts(g))
    return parts


def load_footprints(path: str | Path) -> list[Footprint]:
    """Read building footprints from a GeoJSON file.

    Multi-part features are exploded into one footprint per polygon,
    invalid rings are repaired (a self-crossing ring becomes the
    polygons of its even-odd fill), exteriors are oriented CCW and
    holes CW.  Ids are assigned densely in feature order.
    """
    out: list[Footprint] = []
    for idx, feat in enumerate(_features(path)):
        try:
            geom = shape(feat["geometry"])
        except Exception as exc:
            raise LoadError(f"feature {idx}: bad geometry ({exc})") from exc
        if not geom.is_valid:
            geom = shapely.make_valid(geom)
        for poly in _polygonal_parts(geom):
            out.append(Footprint(id=len(out), polygon=orient(poly, sign=1.0)))
    if not out:
        raise LoadError(f"{path}: no polygonal features")
    return out


def _line_parts(geom) -> list[LineString]:
    if geom.is_empty:
        return []
    if isinstance(geom, LineString):
        return [geom] if geom.length > 0 else []
    if isinstance(geom, MultiLineString) or hasattr(geom, "geoms"):
        parts: list[LineString] = []
        for g in geom.geoms:
            parts.extend(_line_parts(g))
        return parts
    return []


def load_segments(path: str | Path) -> list[Segment]:
    """Read street segments from a GeoJSON file.

    Properties used: ``kind`` (street class, default "unclassified") and
    ``tunnel`` (boolean, default false).  Multi-part lines explode.
    """
    out: list[Segment] = []
    for idx, feat in enumerate(_features(path)):
        try:
            geom = shape(feat["geometry"])
        except Exception as exc:
            raise LoadError(f"feature {idx}: bad geometry ({exc})") from exc
        props = feat.get("properties") or {}
        kind = str(props.get("kind", "unclassified"))
        tunnel = bool(props.get("tunnel", False))
        for line in _line_parts(geom):
            out.append(Segment(id=len(out), line=line, kind=kind, tunnel=tunnel))
    if not out:
        raise LoadError(f"{path}: no line features")
    return out


# ---------------------------------------------------------------------------
# writers


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(df: pd.DataFrame, path: str | Path, index_label: str = "cell_id") -> None:
    """Write a table as CSV: header row, ids ascending, LF endings.

    Missing values serialise as empty fields; a write/read/write cycle
    is byte identical.
    """
    df = df.sort_index()
    text = df.to_csv(index=True, index_label=index_label, lineterminator="\n")
    atomic_write_text(path, text)


def read_table(path: str | Path, index_col: str = "cell_id") -> pd.DataFrame:
    return pd.read_csv(path, index_col=index_col)


def _coords(geom) -> Any:
    # mapping() keeps full float precision; the GEOS GeoJSON writer rounds.
    return mapping(geom)


def feature_collection(features: Iterable[dict]) -> dict:
    return {"type": "FeatureCollection", "features": list(features)}


def write_geojson(path: str | Path, collection: dict) -> None:
    atomic_write_text(path, json.dumps(collection) + "\n")


def cells_to_geojson(cells: list[Cell]) -> dict:
    feats = []
    for cell in sorted(cells, key=lambda c: c.id):
        feats.append(
            {
                "type": "Feature",
                "geometry": _coords(cell.polygon),
                "properties": {
                    "id": cell.id,
                    "enclosure_id": cell.enclosure_id,
                    "segment_id": cell.segment_id,
                    "node_id": cell.node_id,
                },
            }
        )
    return feature_collection(feats)


def geojson_to_cells(path: str | Path) -> list[Cell]:
    cells = []
    for feat in _features(path):
        props = feat["properties"]
        cells.append(
            Cell(
                id=int(props["id"]),
                polygon=shape(feat["geometry"]),
                footprint_id=int(props["id"]),
                enclosure_id=int(props["enclosure_id"]),
                segment_id=int(props["segment_id"]),
                node_id=int(props["node_id"]),
            )
        )
    cells.sort(key=lambda c: c.id)
    return cells


def footprints_to_geojson(blds: list[Footprint]) -> dict:
    feats = []
    for b in sorted(blds, key=lambda f: f.id):
        feats.append(
            {
                "type": "Feature",
                "geometry": _coords(b.polygon),
                "properties": {"footprint_id": b.id},
            }
        )
    return feature_collection(feats)


def geojson_to_footprints(path: str | Path) -> list[Footprint]:
    out = []
    for feat in _features(path):
        out.append(
            Footprint(
                id=int(feat["properties"]["footprint_id"]),
                polygon=shape(feat["geometry"]),
            )
        )
    out.sort(key=lambda f: f.id)
    return out


def segments_to_geojson(segs: list[Segment]) -> dict:
    feats = []
    for s in sorted(segs, key=lambda x: x.id):
        feats.append(
            {
                "type": "Feature",
                "geometry": _coords(s.line),
                "properties": {"segment_id": s.id, "kind": s.kind, "tunnel": s.tunnel},
            }
        )
    return feature_collection(feats)


def geojson_to_segments(path: str | Path) -> list[Segment]:
    out = []
    for feat in _features(path):
        props = feat["properties"]
        out.append(
            Segment(
                id=int(props["segment_id"]),
                line=shape(feat["geometry"]),
                kind=str(props.get("kind", "unclassified")),
                tunnel=bool(props.get("tunnel", False)),
            )
        )
    out.sort(key=lambda s: s.id)
    return out


def write_edge_list(pairs: Iterable[tuple[int, int]], path: str | Path) -> None:
    """Adjacency pairs as a two-column CSV, ordered, each pair once."""
    rows = sorted({(min(a, b), max(a, b)) for a, b in pairs})
    lines = ["a,b"] + [f"{a},{b}" for a, b in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> list[tuple[int, int]]:
    df = pd.read_csv(path)
    return [(int(a), int(b)) for a, b in zip(df["a"], df["b"])]


def write_dendrogram(merges: np.ndarray, path: str | Path) -> None:
    df = pd.DataFrame(merges, columns=["child_a", "child_b", "height", "size"])
    df["child_a"] = df["child_a"].astype(int)
    df["child_b"] = df["child_b"].astype(int)
    df["size"] = df["size"].astype(int)
    text = df.to_csv(index=False, lineterminator="\n")
    atomic_write_text(path, text)


def read_dendrogram(path: str | Path) -> np.ndarray:
    df = pd.read_csv(path)
    return df[["child_a", "child_b", "height", "size"]].to_numpy(dtype=float)
