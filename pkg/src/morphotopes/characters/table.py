"""Assembly of the per-cell feature table.

Every character is measured on its own element (building, cell, street
segment, street node) and then linked onto the tessellation layer: a
cell inherits the values of the segment and node it is assigned to.
The table has one row per cell and the 59 canonical columns.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from shapely.strtree import STRtree

from ..config import CharacterConfig
from ..model import Cell, Footprint
from ..tessellation import StreetGraph
from . import context, network, shape, streets as streets_mod

COLUMNS = [
    "eq01_area_blg",
    "eq02_perimeter_blg",
    "eq03_courtyard_area_blg",
    "eq04_CCo_blg",
    "eq05_corners_blg",
    "eq06_squareness_blg",
    "eq07_ERI_blg",
    "eq08_elongation_blg",
    "eq09_LAL_cell",
    "eq10_area_cell",
    "eq11_CCo_cell",
    "eq12_ERI_cell",
    "eq13_CAR_cell",
    "eq14_length_edg",
    "eq15_width_sp",
    "eq16_openness_sp",
    "eq17_wDev_sp",
    "eq18_linearity_edg",
    "eq19_area_edg",
    "eq20_BpM_edg",
    "eq21_area_node",
    "eq22_SWR_blg",
    "eq23_NDi_blg",
    "eq24_WNe_cell",
    "eq25_area_cell_n",
    "eq26_area_edg_n",
    "eq27_degree_node",
    "eq28_MDi_node",
    "eq29_RC_node_n",
    "eq30_area_node_n",
    "eq31_NCo_blg_adj",
    "eq32_perimeter_blg_adj",
    "eq33_IBD_blg",
    "eq34_BuA_blg",
    "eq35_WRB_cell",
    "eq36_meshedness_node",
    "eq37_MSLE_edg",
    "eq38_CDL_node",
    "eq39_RC_edg",
    "eq40_density_node",
    "eq41_RC_node_net",
    "eq42_area_node_net",
    "eq43_pCD_node",
    "eq44_p3W_node",
    "eq45_p4W_node",
    "eq46_wDensity_node",
    "eq47_lCC_node",
    "eq48_sCl_node",
    "eq49_count_cblg",
    "eq50_area_cblg",
    "eq51_perimeter_cblg",
    "eq52_mibElo_cblg",
    "eq53_mibERI_cblg",
    "eq54_mibCCo_cblg",
    "eq55_mibLAL_cblg",
    "eq56_mibFR_cblg",
    "eq57_mibSCo_cblg",
    "eq58_micBAD_cell",
    "eq59_midBAD_node",
]

NAN = float("nan")


def impute(df: pd.DataFrame, enclosure_ids: pd.Series) -> pd.DataFrame:
    """Fill gaps by enclosure median, then global median, then zero."""
    out = df.copy()
    enc = enclosure_ids.reindex(out.index)
    for col in out.columns:
        vals = out[col]
        if not vals.isna().any():
            continue
        # an all-NaN column goes straight to the zero fill
        if vals.notna().any():
            vals = vals.fillna(vals.groupby(enc).transform("median"))
            vals = vals.fillna(vals.median())
            out[col] = vals
    return out.fillna(0.0)


def compute_features(
    blds: list[Footprint],
    cells: list[Cell],
    street_graph: StreetGraph,
    cell_adj_pairs: list[tuple[int, int]],
    bld_adj_pairs: list[tuple[int, int]],
    cfg: CharacterConfig | None = None,
    workers: int = 1,
    impute_missing: bool = True,
) -> pd.DataFrame:
    """The full 59-column feature table, one row per cell."""
    cfg = cfg or CharacterConfig()
    cells = sorted(cells, key=lambda c: c.id)
    ids = [c.id for c in cells]
    fp = {b.id: b.polygon for b in blds}
    fp_area = {i: p.area for i, p in fp.items()}
    cell_poly = {c.id: c.polygon for c in cells}
    cell_area = {i: p.area for i, p in cell_poly.items()}
    cell_perim = {i: p.length for i, p in cell_poly.items()}
    enc_id = {c.id: c.enclosure_id for c in cells}
    bld_adj = context.pairs_to_adj(bld_adj_pairs, ids)
    cell_adj = context.pairs_to_adj(cell_adj_pairs, ids)

    bshape = {i: shape.building_shape_chars(fp[i], cfg.corner_angle_max) for i in ids}
    cshape = {i: shape.cell_shape_chars(cell_poly[i], fp_area[i]) for i in ids}
    swr = context.shared_walls_ratio(fp, bld_adj)
    diss = context.dissolved_component_chars(fp, bld_adj)
    ctx = context.cell_neighbour_chars(
        ids, cell_adj, cell_area, cell_perim, fp, fp_area, bld_adj, enc_id
    )

    have_streets = bool(street_graph.segments)
    if have_streets:
        idx = network.NetworkIndex(street_graph)
        seg_cells: dict[int, list[int]] = {}
        node_cells: dict[int, list[int]] = {}
        for c in cells:
            if c.segment_id >= 0:
                seg_cells.setdefault(c.segment_id, []).append(c.id)
            if c.node_id >= 0:
                node_cells.setdefault(c.node_id, []).append(c.id)
        node_rec = network.node_chars(
            idx, node_cells, cell_area, fp_area, cfg.closeness_metric_weights
        )
        seg_reach = network.segment_reach_chars(idx, seg_cells, cell_area)
        fp_list = [fp[i] for i in ids]
        fp_tree = STRtree(fp_list)
        lines = [s.line for s in street_graph.segments]
        prof = Parallel(n_jobs=workers, prefer="threads")(
            delayed(streets_mod.street_profile)(
                line, fp_tree, fp_list, cfg.profile_step, cfg.profile_cap
            )
            for line in lines
        )
        seg_scalar = [streets_mod.segment_scalars(line) for line in lines]
        bpm = {
            s.id: len(seg_cells.get(s.id, [])) / s.line.length
            for s in street_graph.segments
        }

    rows = []
    for c in cells:
        i = c.id
        b = bshape[i]
        cc = cshape[i]
        d = diss[i]
        x = ctx[i]
        row = {
            "eq01_area_blg": b["area"],
            "eq02_perimeter_blg": b["perimeter"],
            "eq03_courtyard_area_blg": b["courtyard_area"],
            "eq04_CCo_blg": b["cco"],
            "eq05_corners_blg": b["corners"],
            "eq06_squareness_blg": b["squareness"],
            "eq07_ERI_blg": b["eri"],
            "eq08_elongation_blg": b["elongation"],
            "eq09_LAL_cell": cc["lal"],
            "eq10_area_cell": cc["area"],
            "eq11_CCo_cell": cc["cco"],
            "eq12_ERI_cell": cc["eri"],
            "eq13_CAR_cell": cc["car"],
            "eq22_SWR_blg": swr[i],
            "eq23_NDi_blg": x["ndi"],
            "eq24_WNe_cell": x["wne"],
            "eq25_area_cell_n": x["area_n1"],
            "eq31_NCo_blg_adj": d["comp_courtyards"],
            "eq32_perimeter_blg_adj": d["comp_ext_perimeter"],
            "eq33_IBD_blg": x["ibd"],
            "eq34_BuA_blg": x["bua"],
            "eq35_WRB_cell": x["wrb"],
            "eq49_count_cblg": d["neighbours"],
            "eq50_area_cblg": d["comp_area"],
            "eq51_perimeter_cblg": d["comp_perimeter"],
            "eq52_mibElo_cblg": d["comp_elongation"],
            "eq53_mibERI_cblg": d["comp_eri"],
            "eq54_mibCCo_cblg": d["comp_cco"],
            "eq55_mibLAL_cblg": d["comp_lal"],
            "eq56_mibFR_cblg": d["comp_fr"],
            "eq57_mibSCo_cblg": d["comp_sco"],
            "eq58_micBAD_cell": x["bad_n1"],
        }
        if have_streets and c.segment_id >= 0:
            s = c.segment_id
            length, lin = seg_scalar[s]
            width, openness, wdev = prof[s]
            row.update(
                {
                    "eq14_length_edg": length,
                    "eq15_width_sp": width,
                    "eq16_openness_sp": openness,
                    "eq17_wDev_sp": wdev,
                    "eq18_linearity_edg": lin,
                    "eq19_area_edg": seg_reach[s]["area_served"],
                    "eq20_BpM_edg": bpm[s],
                    "eq26_area_edg_n": seg_reach[s]["reach_area1"],
                    "eq37_MSLE_edg": seg_reach[s]["msle"],
                    "eq39_RC_edg": seg_reach[s]["rc3"],
                }
            )
        if have_streets and c.node_id >= 0:
            nr = node_rec[c.node_id]
            row.update(
                {
                    "eq21_area_node": nr["area_served"],
                    "eq27_degree_node": nr["degree"],
                    "eq28_MDi_node": nr["mdi"],
                    "eq29_RC_node_n": nr["rc1"],
                    "eq30_area_node_n": nr["area1"],
                    "eq36_meshedness_node": nr["meshedness"],
                    "eq38_CDL_node": nr["cdl3"],
                    "eq40_density_node": nr["node_density"],
                    "eq41_RC_node_net": nr["rc3"],
                    "eq42_area_node_net": nr["area3"],
                    "eq43_pCD_node": nr["pcd"],
                    "eq44_p3W_node": nr["p3w"],
                    "eq45_p4W_node": nr["p4w"],
                    "eq46_wDensity_node": nr["wdensity"],
                    "eq47_lCC_node": nr["closeness"],
                    "eq48_sCl_node": nr["scl"],
                    "eq59_midBAD_node": nr["bad"],
                }
            )
        rows.append(row)

    df = pd.DataFrame(rows, index=pd.Index(ids, name="cell_id"), columns=COLUMNS)
    df = df.astype(float)
    if impute_missing:
        df = impute(df, pd.Series(enc_id))
    return df
