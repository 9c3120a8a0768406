import math

import numpy as np
import pytest

from morphotopes.characters.context import (
    adjacency_components,
    cell_neighbour_chars,
    dissolved_component_chars,
    neighbourhood,
    pairs_to_adj,
    shared_walls_ratio,
)
from conftest import rect

# path graph 0-1-2-3-4
PATH = pairs_to_adj([(0, 1), (1, 2), (2, 3), (3, 4)], list(range(5)))


def test_neighbourhood_includes_focal():
    assert neighbourhood(PATH, 2, 0) == {2}
    assert neighbourhood(PATH, 2, 1) == {1, 2, 3}
    assert neighbourhood(PATH, 0, 3) == {0, 1, 2, 3}
    assert neighbourhood(PATH, 0, 99) == {0, 1, 2, 3, 4}


def test_neighbourhood_ring_graph():
    ring = pairs_to_adj([(0, 1), (1, 2), (2, 3), (3, 0)], list(range(4)))
    assert neighbourhood(ring, 0, 1) == {0, 1, 3}
    assert neighbourhood(ring, 0, 2) == {0, 1, 2, 3}


def test_adjacency_components():
    adj = pairs_to_adj([(0, 1), (1, 2), (5, 6)], [0, 1, 2, 3, 5, 6])
    comps = adjacency_components(adj, [0, 1, 2, 3, 5, 6])
    assert comps == [[0, 1, 2], [3], [5, 6]]


def test_adjacency_components_respects_id_subset():
    adj = pairs_to_adj([(0, 1), (1, 2)], [0, 1, 2])
    # restricting to {0, 2} removes the bridge through 1
    assert adjacency_components(adj, [0, 2]) == [[0], [2]]


def test_shared_walls_ratio_two_squares():
    polys = {0: rect(0, 0, 10, 10), 1: rect(10, 0, 10, 10)}
    adj = pairs_to_adj([(0, 1)], [0, 1])
    swr = shared_walls_ratio(polys, adj)
    # 10 m of the 40 m outline is shared
    assert swr[0] == pytest.approx(0.25)
    assert swr[1] == pytest.approx(0.25)


def test_shared_walls_ratio_gap_neighbour_contributes_nothing():
    polys = {0: rect(0, 0, 10, 10), 1: rect(10.3, 0, 10, 10)}
    adj = pairs_to_adj([(0, 1)], [0, 1])  # within tolerance but not touching
    swr = shared_walls_ratio(polys, adj)
    assert swr[0] == 0.0


def test_dissolved_component_chars_two_touching_squares():
    polys = {0: rect(0, 0, 10, 10), 1: rect(10, 0, 10, 10)}
    adj = pairs_to_adj([(0, 1)], [0, 1])
    chars = dissolved_component_chars(polys, adj)
    for i in (0, 1):
        assert chars[i]["comp_area"] == pytest.approx(200.0)
        assert chars[i]["comp_perimeter"] == pytest.approx(60.0)
        assert chars[i]["comp_elongation"] == pytest.approx(0.5)
        assert chars[i]["comp_eri"] == pytest.approx(1.0)
        assert chars[i]["comp_lal"] == pytest.approx(math.sqrt(500))
        assert chars[i]["comp_courtyards"] == 0.0
        assert chars[i]["neighbours"] == 1.0


def test_dissolved_isolated_building():
    polys = {7: rect(0, 0, 10, 10)}
    chars = dissolved_component_chars(polys, {7: set()})
    assert chars[7]["comp_area"] == pytest.approx(100.0)
    assert chars[7]["neighbours"] == 0.0


def test_dissolved_courtyard_count():
    # four rectangles forming a ring with a hole in the middle
    polys = {
        0: rect(0, 0, 30, 10),
        1: rect(0, 20, 30, 10),
        2: rect(0, 10, 10, 10),
        3: rect(20, 10, 10, 10),
    }
    adj = pairs_to_adj([(0, 2), (0, 3), (1, 2), (1, 3)], [0, 1, 2, 3])
    chars = dissolved_component_chars(polys, adj)
    assert chars[0]["comp_courtyards"] == 1.0
    assert chars[0]["comp_ext_perimeter"] < chars[0]["comp_perimeter"]


def test_cell_neighbour_chars_small_scene():
    # three cells in a row; buildings centred inside
    cells = {0: rect(0, 0, 20, 20), 1: rect(20, 0, 20, 20), 2: rect(40, 0, 20, 20)}
    blds = {0: rect(5, 5, 10, 10), 1: rect(25, 5, 10, 10), 2: rect(45, 5, 10, 10)}
    cell_adj = pairs_to_adj([(0, 1), (1, 2)], [0, 1, 2])
    bld_adj = {0: set(), 1: set(), 2: set()}
    chars = cell_neighbour_chars(
        cell_ids=[0, 1, 2],
        cell_adj=cell_adj,
        cell_area={i: p.area for i, p in cells.items()},
        cell_perim={i: p.length for i, p in cells.items()},
        fp_poly=blds,
        fp_area={i: p.area for i, p in blds.items()},
        bld_adj=bld_adj,
        enclosure_id={0: 0, 1: 0, 2: 0},
    )
    # middle cell: two neighbours over an 80 m perimeter
    assert chars[1]["wne"] == pytest.approx(2 / 80)
    assert chars[1]["area_n1"] == pytest.approx(1200.0)
    # buildings are 10 m apart edge to edge
    assert chars[1]["ndi"] == pytest.approx(10.0)
    assert chars[1]["bad_n1"] == pytest.approx(0.0)
    # all three cells reachable in three hops; one enclosure
    assert chars[0]["wrb"] == pytest.approx(1 / 1200)
    # no touching buildings: every component is a singleton
    assert chars[0]["bua"] == pytest.approx(1.0)
    # end cell ibd: mean of distances to both others (10 and 30)
    assert chars[0]["ibd"] == pytest.approx(20.0)


def test_cell_neighbour_chars_isolated_cell():
    chars = cell_neighbour_chars(
        cell_ids=[0],
        cell_adj={0: set()},
        cell_area={0: 400.0},
        cell_perim={0: 80.0},
        fp_poly={0: rect(5, 5, 10, 10)},
        fp_area={0: 100.0},
        bld_adj={0: set()},
        enclosure_id={0: 0},
    )
    assert math.isnan(chars[0]["ndi"])
    assert math.isnan(chars[0]["ibd"])
    assert chars[0]["wne"] == 0.0
    assert chars[0]["area_n1"] == pytest.approx(400.0)


def test_pairs_to_adj_symmetric_no_self_loops():
    adj = pairs_to_adj([(0, 1), (1, 1)], [0, 1])
    assert adj[0] == {1}
    assert adj[1] == {0}
