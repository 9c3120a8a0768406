"""Street-network characters over ego subgraphs.

Topological distance for segments runs on the segment incidence graph
(segments sharing an endpoint), for nodes on the node graph.  A
"within distance k" set includes its centre.  Degree-based shares use
the full-network degree of each node; subgraph statistics (edge
counts, lengths, shortest paths) use the induced ego subgraph.
"""

from __future__ import annotations

import heapq
from collections import deque

import numpy as np

from ..tessellation import StreetGraph
from .context import neighbourhood


class NetworkIndex:
    """Flat, read-only arrays describing one street network."""

    def __init__(self, streets: StreetGraph):
        g = streets.graph
        self.n_nodes = g.number_of_nodes()
        self.edges: list[tuple[int, int, float, int]] = []  # u, v, length, segment id
        for u, v, key, data in g.edges(keys=True, data=True):
            self.edges.append((u, v, float(data["length"]), int(data["segment_id"])))
        self.edges.sort(key=lambda e: e[3])
        self.adj_nodes: dict[int, set[int]] = {v: set() for v in range(self.n_nodes)}
        self.incident: dict[int, list[int]] = {v: [] for v in range(self.n_nodes)}
        self.full_degree: dict[int, int] = {v: 0 for v in range(self.n_nodes)}
        for idx, (u, v, _, _) in enumerate(self.edges):
            if u != v:
                self.adj_nodes[u].add(v)
                self.adj_nodes[v].add(u)
                self.incident[u].append(idx)
                self.incident[v].append(idx)
                self.full_degree[u] += 1
                self.full_degree[v] += 1
            else:
                self.incident[u].append(idx)
                self.full_degree[u] += 2
        # segments sharing an endpoint
        n_seg = len(streets.segments)
        self.adj_segments: dict[int, set[int]] = {s: set() for s in range(n_seg)}
        for v, idxs in self.incident.items():
            sids = [self.edges[i][3] for i in idxs]
            for a in sids:
                for b in sids:
                    if a != b:
                        self.adj_segments[a].add(b)
        self.seg_length = {self.edges[i][3]: self.edges[i][2] for i in range(len(self.edges))}

    def ego_edges(self, nodes: set[int]) -> list[int]:
        """Indexes of edges with both endpoints inside ``nodes``."""
        out = set()
        for v in nodes:
            for i in self.incident[v]:
                u, w, _, _ = self.edges[i]
                if u in nodes and w in nodes:
                    out.add(i)
        return sorted(out)


def _shortest_path_sums(idx: NetworkIndex, center: int, nodes: set[int], metric: bool) -> float:
    """Sum of shortest-path distances from center within the induced subgraph."""
    if metric:
        best: dict[int, float] = {center: 0.0}
        heap = [(0.0, center)]
        while heap:
            d, v = heapq.heappop(heap)
            if d > best.get(v, float("inf")):
                continue
            for i in idx.incident[v]:
                u, w, length, _ = idx.edges[i]
                other = w if v == u else u
                if other == v or other not in nodes:
                    continue
                nd = d + length
                if nd < best.get(other, float("inf")):
                    best[other] = nd
                    heapq.heappush(heap, (nd, other))
        return sum(d for v, d in best.items() if v != center)
    dist = {center: 0}
    queue = deque([center])
    while queue:
        v = queue.popleft()
        for u in idx.adj_nodes[v]:
            if u in nodes and u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return float(sum(d for v, d in dist.items() if v != center))


def square_clustering(idx: NetworkIndex, v: int) -> float:
    """Fraction of potential squares through v that exist.

    For each neighbour pair (u, w): q = common neighbours besides v;
    the alternative term counts the remaining free stubs of u and w.
    """
    neigh = sorted(idx.adj_nodes[v])
    if len(neigh) < 2:
        return 0.0
    deg = {u: len(idx.adj_nodes[u]) for u in neigh}
    num = 0.0
    den = 0.0
    for a in range(len(neigh)):
        for b in range(a + 1, len(neigh)):
            u, w = neigh[a], neigh[b]
            q = len((idx.adj_nodes[u] & idx.adj_nodes[w]) - {v})
            theta = 1 if w in idx.adj_nodes[u] else 0
            alt = (deg[u] - (1 + q + theta)) * (deg[w] - (1 + q + theta))
            num += q
            den += alt + q
    if den == 0:
        return 0.0
    return num / den


def node_chars(
    idx: NetworkIndex,
    node_cells: dict[int, list[int]],
    cell_area: dict[int, float],
    fp_area: dict[int, float],
    metric_closeness: bool = True,
) -> dict[int, dict[str, float]]:
    """All per-node characters, keyed by node id."""
    a_node = {
        v: sum(cell_area[c] for c in node_cells.get(v, []))
        for v in range(idx.n_nodes)
    }
    n_cells = {v: len(node_cells.get(v, [])) for v in range(idx.n_nodes)}
    out: dict[int, dict[str, float]] = {}
    for v in range(idx.n_nodes):
        rec: dict[str, float] = {}
        rec["area_served"] = a_node[v]
        rec["degree"] = float(idx.full_degree[v])
        lengths = [idx.edges[i][2] for i in idx.incident[v]]
        rec["mdi"] = float(np.mean(lengths)) if lengths else float("nan")

        n1 = neighbourhood(idx.adj_nodes, v, 1)
        rec["rc1"] = float(sum(n_cells[u] for u in n1))
        rec["area1"] = float(sum(a_node[u] for u in n1))

        n3 = neighbourhood(idx.adj_nodes, v, 3)
        rec["rc3"] = float(sum(n_cells[u] for u in n3))
        rec["area3"] = float(sum(a_node[u] for u in n3))
        cdl = 0.0
        for i in idx.ego_edges(n3):
            u, w, length, _ = idx.edges[i]
            if u != w and (idx.full_degree[u] == 1 or idx.full_degree[w] == 1):
                cdl += length
        rec["cdl3"] = cdl

        n5 = neighbourhood(idx.adj_nodes, v, 5)
        edges5 = idx.ego_edges(n5)
        e = len(edges5)
        nv = len(n5)
        denom = 2 * nv - 5
        rec["meshedness"] = (
            min(max((e - nv + 1) / denom, 0.0), 1.0) if denom > 0 else 0.0
        )
        total_len = sum(idx.edges[i][2] for i in edges5)
        rec["node_density"] = nv / total_len if total_len > 0 else float("nan")
        degs = [idx.full_degree[u] for u in n5]
        rec["pcd"] = sum(1 for d in degs if d == 1) / nv
        rec["p3w"] = sum(1 for d in degs if d == 3) / nv
        rec["p4w"] = sum(1 for d in degs if d == 4) / nv
        rec["wdensity"] = (
            sum(d - 1 for d in degs) / total_len if total_len > 0 else float("nan")
        )
        if nv > 1:
            sp = _shortest_path_sums(idx, v, n5, metric_closeness)
            rec["closeness"] = (nv - 1) / sp if sp > 0 else 0.0
        else:
            rec["closeness"] = 0.0
        rec["scl"] = square_clustering(idx, v)

        areas = [fp_area[c] for c in node_cells.get(v, [])]
        rec["bad"] = float(np.std(areas)) if areas else float("nan")
        out[v] = rec
    return out


def segment_reach_chars(
    idx: NetworkIndex,
    seg_cells: dict[int, list[int]],
    cell_area: dict[int, float],
) -> dict[int, dict[str, float]]:
    """Reach characters per segment id."""
    a_edg = {
        s: sum(cell_area[c] for c in seg_cells.get(s, []))
        for s in idx.adj_segments
    }
    n_cells = {s: len(seg_cells.get(s, [])) for s in idx.adj_segments}
    out: dict[int, dict[str, float]] = {}
    for s in sorted(idx.adj_segments):
        rec: dict[str, float] = {}
        rec["area_served"] = a_edg[s]
        n1 = neighbourhood(idx.adj_segments, s, 1)
        rec["reach_area1"] = float(sum(a_edg[t] for t in n1))
        n3 = neighbourhood(idx.adj_segments, s, 3)
        rec["msle"] = float(np.mean([idx.seg_length[t] for t in sorted(n3)]))
        rec["rc3"] = float(sum(n_cells[t] for t in n3))
        out[s] = rec
    return out
