"""Coarse-level construction and prolongation operators.

One coarsening step takes a neighbor graph on level ``l`` and produces

* a subsample of its vertices (the coarse points),
* the graph Voronoi partition of the fine vertices around those samples,
* the coarse edge set (two samples are joined when their cells touch),
* a prolongation matrix that interpolates coarse values on triangles of the
  coarse edge set.

The coarse edges and (optionally shifted) coarse positions become the graph
for the next step.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .mesh_io import SurfaceGraph, average_edge_length, write_obj
from .sparse import finalize

log = logging.getLogger(__name__)

SAMPLING_VARIANTS = ("gravo", "random", "fps", "mis")
SELECTION_VARIANTS = ("voronoi_triangle", "closest2", "closest3", "closest4", "random3",
                      "closest_vertex", "all_triangles")
WEIGHTING_VARIANTS = ("barycentric", "uniform", "inverse_distance")

DEGENERATE_AREA = 1e-12  # times the squared mean edge length of the fine level
IDW_OFFSET = 1e-12  # times the mean edge length; keeps 1/d finite
SNAP_WEIGHT = 1e-12  # barycentric weight within this of 1 counts as landing on a vertex


@dataclass(frozen=True)
class HierarchyConfig:
    phi: float = 1.0 / 8.0
    coarsest_size: int = 1000
    ring_limit: int = 2
    shift_seeds: bool = True
    sampling: str = "gravo"
    selection: str = "voronoi_triangle"
    weighting: str = "barycentric"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi}")
        if self.coarsest_size < 4:
            raise ValueError("coarsest_size must be at least 4")
        if self.ring_limit < 1:
            raise ValueError("ring_limit must be at least 1")
        if self.sampling not in SAMPLING_VARIANTS:
            raise ValueError(f"unknown sampling variant {self.sampling!r}")
        if self.selection not in SELECTION_VARIANTS:
            raise ValueError(f"unknown selection variant {self.selection!r}")
        if self.weighting not in WEIGHTING_VARIANTS:
            raise ValueError(f"unknown weighting variant {self.weighting!r}")


@dataclass(frozen=True, eq=False)
class VoronoiPartition:
    """Assignment of every fine vertex to its nearest seed in graph distance.

    ``seed_of[v]`` is a coarse index (position in ``seeds``), ``dist_of[v]``
    the graph distance to that seed.  Vertices that no seed can reach are
    assigned to the Euclidean-nearest seed, keep ``dist_of = inf`` and are
    counted in ``unreachable``.
    """

    seeds: np.ndarray
    seed_of: np.ndarray
    dist_of: np.ndarray
    unreachable: int = 0

    @property
    def n_coarse(self) -> int:
        return self.seeds.shape[0]


@dataclass(eq=False)
class Hierarchy:
    levels: list[SurfaceGraph]
    prolongations: list[sp.csr_matrix] = field(default_factory=list)
    fallback_fraction: list[float] = field(default_factory=list)
    partitions: list[VoronoiPartition] = field(default_factory=list)
    triangles: list[np.ndarray] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def sizes(self) -> list[int]:
        return [g.n_vertices for g in self.levels]

    def stats(self) -> list[dict]:
        """One record per level: size, edges, candidate triangles, fallback rate, build time."""
        rows = []
        for l, g in enumerate(self.levels):
            if l == 0:
                tris = candidate_triangles(g.edges).shape[0]
            else:
                tris = self.triangles[l - 1].shape[0]
            rows.append({
                "level": l + 1,
                "n": g.n_vertices,
                "edges": g.n_edges,
                "triangles": tris,
                "fallback_fraction": self.fallback_fraction[l] if l < len(self.fallback_fraction) else 0.0,
                "seconds": self.seconds[l] if l < len(self.seconds) else 0.0,
            })
        return rows

    def export_levels(self, directory, stem: str = "level") -> list:
        """Write each level's points (and candidate triangles for coarse levels) as OBJ."""
        from pathlib import Path

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for l, g in enumerate(self.levels):
            path = directory / f"{stem}_{l + 1}.obj"
            write_obj(path, g.positions, self.triangles[l - 1] if l > 0 else None)
            paths.append(path)
        return paths


# --- sampling -------------------------------------------------------------------

def sampling_radius(graph: SurfaceGraph, phi: float) -> float:
    """Minimum sample spacing ``phi**(-1/3)`` times the mean edge length."""
    return phi ** (-1.0 / 3.0) * average_edge_length(graph)


def _adjacency_lists(graph: SurfaceGraph):
    ptr = graph.indptr.tolist()
    idx = graph.indices.tolist()
    lens = graph.lengths.tolist()
    return ([idx[ptr[i]:ptr[i + 1]] for i in range(graph.n_vertices)],
            [lens[ptr[i]:ptr[i + 1]] for i in range(graph.n_vertices)])


def _hop_limited_distances(nbrs, lens, source, hops):
    """Shortest path lengths from ``source`` over paths of at most ``hops`` edges."""
    dist = {source: 0.0}
    frontier = [source]
    for _ in range(hops):
        changed = []
        for u in frontier:
            du = dist[u]
            for v, w in zip(nbrs[u], lens[u]):
                nd = du + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    changed.append(v)
        if not changed:
            break
        frontier = list(dict.fromkeys(changed))
    return dist


def sample_points(graph: SurfaceGraph, phi: float = 1.0 / 8.0, ring_limit: int = 2) -> np.ndarray:
    """Greedy spaced subsample in a single ascending sweep.

    Picking an eligible vertex makes every vertex closer than the sampling
    radius (searching at most ``ring_limit`` hops away) ineligible.
    """
    n = graph.n_vertices
    if n == 0:
        raise ValueError("cannot sample an empty graph")
    if graph.n_edges == 0:
        return np.arange(n, dtype=np.int64)
    r = sampling_radius(graph, phi)
    nbrs, lens = _adjacency_lists(graph)
    eligible = [True] * n
    picked = []
    for p in range(n):
        if not eligible[p]:
            continue
        picked.append(p)
        eligible[p] = False
        for v, d in _hop_limited_distances(nbrs, lens, p, ring_limit).items():
            if d < r:
                eligible[v] = False
    return np.array(picked, dtype=np.int64)


def target_count(n: int, phi: float) -> int:
    return max(1, min(n, math.ceil(phi * n)))


def sample_random(graph: SurfaceGraph, phi: float, rng_seed=0) -> np.ndarray:
    """``ceil(phi * n)`` distinct vertices drawn uniformly, returned in ascending order."""
    n = graph.n_vertices
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return np.sort(rng.choice(n, size=target_count(n, phi), replace=False)).astype(np.int64)


def _relax_from(nbrs, lens, source, dist):
    """Lower ``dist`` in place to include distances from ``source``."""
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in zip(nbrs[u], lens[u]):
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))


def sample_fps(graph: SurfaceGraph, phi: float) -> np.ndarray:
    """Farthest point sampling in graph distance, starting at vertex 0.

    Each connected component's lowest vertex is taken first so that every
    component receives a sample.
    """
    n = graph.n_vertices
    target = target_count(n, phi)
    nbrs, lens = _adjacency_lists(graph)
    adj = sp.csr_matrix((np.ones(graph.indices.shape[0]), graph.indices, graph.indptr), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    firsts = sorted({int(np.flatnonzero(labels == c)[0]) for c in np.unique(labels)})
    dist = [math.inf] * n
    picked = []
    for s in firsts:
        picked.append(s)
        _relax_from(nbrs, lens, s, dist)
    d = np.array(dist)
    while len(picked) < target:
        far = int(np.argmax(d))
        if d[far] <= 0.0:
            break
        picked.append(far)
        _relax_from(nbrs, lens, far, dist)
        d = np.array(dist)
    return np.array(picked, dtype=np.int64)


def _hop_ball(nbrs, source, hops):
    seen = {source}
    frontier = [source]
    depth = 0
    for depth in range(1, hops + 1):
        nxt = []
        for u in frontier:
            for v in nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if not nxt:
            return seen, False
        frontier = nxt
    return seen, True


def _greedy_mis(nbrs, n, hops):
    eligible = [True] * n
    picked = []
    grew = False
    for p in range(n):
        if not eligible[p]:
            continue
        picked.append(p)
        ball, reached = _hop_ball(nbrs, p, hops)
        grew = grew or reached
        for v in ball:
            eligible[v] = False
    return picked, grew


def sample_mis(graph: SurfaceGraph, phi: float) -> np.ndarray:
    """Greedy maximal independent set of the k-hop graph.

    ``k`` starts at 1 and grows until the set has at most ``ceil(phi * n)``
    vertices, or until larger balls stop reaching new vertices.
    """
    n = graph.n_vertices
    target = target_count(n, phi)
    nbrs, _ = _adjacency_lists(graph)
    hops = 1
    while True:
        picked, grew = _greedy_mis(nbrs, n, hops)
        if len(picked) <= target or not grew:
            return np.array(picked, dtype=np.int64)
        hops += 1


# --- graph Voronoi ----------------------------------------------------------------

def graph_voronoi(graph: SurfaceGraph, seeds) -> VoronoiPartition:
    """Multisource Dijkstra; ties go to the lower coarse index."""
    seeds = np.asarray(seeds, dtype=np.int64)
    n = graph.n_vertices
    if seeds.size == 0:
        raise ValueError("graph Voronoi needs at least one seed")
    if seeds.min() < 0 or seeds.max() >= n:
        raise IndexError("seed index out of range")
    if np.unique(seeds).size != seeds.size:
        raise ValueError("duplicate seeds")
    nbrs, lens = _adjacency_lists(graph)
    dist = [math.inf] * n
    owner = [-1] * n
    heap = []
    for c, s in enumerate(seeds.tolist()):
        dist[s] = 0.0
        owner[s] = c
        heap.append((0.0, c, s))
    heapq.heapify(heap)
    while heap:
        d, c, u = heapq.heappop(heap)
        if d != dist[u] or c != owner[u]:
            continue
        for v, w in zip(nbrs[u], lens[u]):
            nd = d + w
            dv = dist[v]
            if nd < dv or (nd == dv and c < owner[v]):
                dist[v] = nd
                owner[v] = c
                heapq.heappush(heap, (nd, c, v))
    owner = np.array(owner, dtype=np.int64)
    dist = np.array(dist)
    lost = np.flatnonzero(owner < 0)
    if lost.size:
        sp_pos = graph.positions[seeds]
        d2 = ((graph.positions[lost][:, None, :] - sp_pos[None, :, :]) ** 2).sum(-1)
        owner[lost] = np.argmin(d2, axis=1)
        log.warning("%d vertices unreachable from any seed; assigned by Euclidean distance", lost.size)
    return VoronoiPartition(seeds, owner, dist, int(lost.size))


def voronoi_adjacency(graph: SurfaceGraph, part: VoronoiPartition) -> np.ndarray:
    """Coarse edges between seeds whose cells are joined by a fine edge."""
    e = graph.edges
    a = part.seed_of[e[:, 0]]
    b = part.seed_of[e[:, 1]]
    keep = a != b
    pairs = np.sort(np.column_stack([a[keep], b[keep]]), axis=1)
    if pairs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(pairs, axis=0)


def candidate_triangles(edges) -> np.ndarray:
    """All 3-cliques of an edge set, as ascending index triples in lexicographic order."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    e = np.unique(np.sort(edges, axis=1), axis=0)
    e = e[e[:, 0] != e[:, 1]]
    higher: dict[int, list[int]] = {}
    for i, j in e.tolist():
        higher.setdefault(i, []).append(j)
    higher_sets = {i: set(v) for i, v in higher.items()}
    tris = []
    for i, j in e.tolist():
        hj = higher_sets.get(j)
        if not hj:
            continue
        for k in higher[i]:
            if k > j and k in hj:
                tris.append((i, j, k))
    if not tris:
        return np.zeros((0, 3), dtype=np.int64)
    tris.sort()
    return np.array(tris, dtype=np.int64)


def shift_seeds(part: VoronoiPartition, fine_positions) -> np.ndarray:
    """Coarse positions moved to the centroid of their Voronoi cells."""
    fine_positions = np.asarray(fine_positions, dtype=np.float64)
    m = part.n_coarse
    sums = np.zeros((m, 3))
    np.add.at(sums, part.seed_of, fine_positions)
    counts = np.bincount(part.seed_of, minlength=m).astype(np.float64)
    return sums / counts[:, None]


# --- closest point on a triangle ---------------------------------------------------

@numba.njit(cache=True)
def _dot(u0, u1, u2, v0, v1, v2):
    return u0 * v0 + u1 * v1 + u2 * v2


@numba.njit(cache=True)
def _segment_weights(p, a, b):
    ab0, ab1, ab2 = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    den = _dot(ab0, ab1, ab2, ab0, ab1, ab2)
    if den <= 0.0:
        return 1.0, 0.0
    t = _dot(p[0] - a[0], p[1] - a[1], p[2] - a[2], ab0, ab1, ab2) / den
    t = min(1.0, max(0.0, t))
    return 1.0 - t, t


@numba.njit(cache=True)
def _project(p, a, b, c, area_tol):
    """Barycentric weights of the point of triangle abc closest to p."""
    ab0, ab1, ab2 = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    ac0, ac1, ac2 = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    cx = ab1 * ac2 - ab2 * ac1
    cy = ab2 * ac0 - ab0 * ac2
    cz = ab0 * ac1 - ab1 * ac0
    area = 0.5 * math.sqrt(cx * cx + cy * cy + cz * cz)
    w0 = w1 = w2 = 0.0
    if area <= area_tol:
        # nearly collinear: closest point on the longest edge
        lab = _dot(ab0, ab1, ab2, ab0, ab1, ab2)
        lac = _dot(ac0, ac1, ac2, ac0, ac1, ac2)
        lbc = (c[0] - b[0]) ** 2 + (c[1] - b[1]) ** 2 + (c[2] - b[2]) ** 2
        if lab >= lac and lab >= lbc:
            w0, w1 = _segment_weights(p, a, b)
        elif lac >= lbc:
            w0, w2 = _segment_weights(p, a, c)
        else:
            w1, w2 = _segment_weights(p, b, c)
    else:
        ap0, ap1, ap2 = p[0] - a[0], p[1] - a[1], p[2] - a[2]
        d1 = _dot(ab0, ab1, ab2, ap0, ap1, ap2)
        d2 = _dot(ac0, ac1, ac2, ap0, ap1, ap2)
        bp0, bp1, bp2 = p[0] - b[0], p[1] - b[1], p[2] - b[2]
        d3 = _dot(ab0, ab1, ab2, bp0, bp1, bp2)
        d4 = _dot(ac0, ac1, ac2, bp0, bp1, bp2)
        cp0, cp1, cp2 = p[0] - c[0], p[1] - c[1], p[2] - c[2]
        d5 = _dot(ab0, ab1, ab2, cp0, cp1, cp2)
        d6 = _dot(ac0, ac1, ac2, cp0, cp1, cp2)
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d1 <= 0.0 and d2 <= 0.0:
            w0 = 1.0
        elif d3 >= 0.0 and d4 <= d3:
            w1 = 1.0
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            t = d1 / (d1 - d3)
            w0, w1 = 1.0 - t, t
        elif d6 >= 0.0 and d5 <= d6:
            w2 = 1.0
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            t = d2 / (d2 - d6)
            w0, w2 = 1.0 - t, t
        elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            w1, w2 = 1.0 - t, t
        else:
            den = 1.0 / (va + vb + vc)
            w1 = vb * den
            w2 = vc * den
            w0 = 1.0 - w1 - w2
    w0 = min(1.0, max(0.0, w0))
    w1 = min(1.0, max(0.0, w1))
    w2 = min(1.0, max(0.0, w2))
    s = w0 + w1 + w2
    w0 /= s
    w1 /= s
    w2 /= s
    q0 = w0 * a[0] + w1 * b[0] + w2 * c[0]
    q1 = w0 * a[1] + w1 * b[1] + w2 * c[1]
    q2 = w0 * a[2] + w1 * b[2] + w2 * c[2]
    d = (p[0] - q0) ** 2 + (p[1] - q1) ** 2 + (p[2] - q2) ** 2
    return w0, w1, w2, d


def project_to_triangle(p, a, b, c, area_tol: float | None = None):
    """Closest point of the closed triangle ``abc`` to ``p``.

    Returns ``(weights, squared_distance)`` where ``weights`` are the
    barycentric coordinates of the closest point.  Triangles with area below
    ``area_tol`` (default: 1e-12 times the squared mean edge length) are
    treated as their longest edge.
    """
    p, a, b, c = (np.asarray(x, dtype=np.float64) for x in (p, a, b, c))
    if area_tol is None:
        mean_edge = (np.linalg.norm(b - a) + np.linalg.norm(c - a) + np.linalg.norm(c - b)) / 3.0
        area_tol = DEGENERATE_AREA * mean_edge**2
    w0, w1, w2, d = _project(p, a, b, c, area_tol)
    return np.array([w0, w1, w2]), d


@numba.njit(cache=True)
def _best_triangles(fine_pos, coarse_pos, seed_of, tri_ptr, tri_ids, tris, area_tol):
    n = fine_pos.shape[0]
    best = np.full(n, -1, dtype=np.int64)
    weights = np.zeros((n, 3))
    dist2 = np.full(n, np.inf)
    for v in range(n):
        s = seed_of[v]
        for q in range(tri_ptr[s], tri_ptr[s + 1]):
            t = tri_ids[q]
            w0, w1, w2, d = _project(fine_pos[v], coarse_pos[tris[t, 0]], coarse_pos[tris[t, 1]],
                                     coarse_pos[tris[t, 2]], area_tol)
            if d < dist2[v]:
                dist2[v] = d
                best[v] = t
                weights[v, 0] = w0
                weights[v, 1] = w1
                weights[v, 2] = w2
    return best, weights, dist2


# --- prolongation ------------------------------------------------------------------

def _triangle_area(pos, tris):
    a, b, c = pos[tris[:, 0]], pos[tris[:, 1]], pos[tris[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _incidence(tris, m):
    """CSR lists of the triangles incident to each coarse vertex."""
    owner = tris.ravel()
    tid = np.repeat(np.arange(tris.shape[0]), 3)
    order = np.lexsort((tid, owner))
    ptr = np.zeros(m + 1, dtype=np.int64)
    np.add.at(ptr, owner + 1, 1)
    return np.cumsum(ptr), tid[order]


def _fan_triangles(coarse_nbrs, m):
    """Triangles ``(s, a, b)`` for every pair ``a < b`` of coarse neighbors of ``s``.

    Returned in per-vertex blocks so the incidence lists are contiguous.
    """
    tris = []
    ptr = [0]
    for s in range(m):
        nb = coarse_nbrs[s]
        for x in range(len(nb)):
            for y in range(x + 1, len(nb)):
                tris.append((s, nb[x], nb[y]))
        ptr.append(len(tris))
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    return np.array(ptr, dtype=np.int64), np.arange(tris.shape[0], dtype=np.int64), tris


def _idw_row(p, cand, coarse_pos, k, delta):
    """Inverse-distance weights over the ``k`` candidates closest to ``p``."""
    d = np.linalg.norm(coarse_pos[cand] - p, axis=1)
    order = np.lexsort((cand, d))[:k]
    w = 1.0 / (d[order] + delta)
    return cand[order], w / w.sum()


def build_prolongation(fine: SurfaceGraph, part: VoronoiPartition, coarse_edges, config: HierarchyConfig,
                       coarse_positions=None, rng=None):
    """Prolongation from the coarse points of ``part`` to the vertices of ``fine``.

    Returns ``(P, fallback_fraction, triangles)``: the ``n_fine x n_coarse``
    matrix, the share of rows that used the inverse-distance fallback, and
    the candidate triangles that were searched.
    """
    m = part.n_coarse
    n = fine.n_vertices
    if coarse_positions is None:
        coarse_positions = shift_seeds(part, fine.positions) if config.shift_seeds else fine.positions[part.seeds]
    cpos = np.ascontiguousarray(coarse_positions, dtype=np.float64)
    fpos = fine.positions
    coarse_edges = np.asarray(coarse_edges, dtype=np.int64).reshape(-1, 2)
    coarse_graph = SurfaceGraph.from_edges(cpos, coarse_edges)
    coarse_nbrs = coarse_graph.adjacency()
    mean_edge = average_edge_length(fine) if fine.n_edges else 1.0
    delta = IDW_OFFSET * mean_edge
    area_tol = DEGENERATE_AREA * mean_edge**2
    seed_of = part.seed_of

    rows, cols, vals = [], [], []

    def emit(v, c, w):
        rows.extend([v] * len(c))
        cols.extend(np.asarray(c).tolist())
        vals.extend(np.asarray(w).tolist())

    def neighborhood(s):
        return np.array([s] + coarse_nbrs[s], dtype=np.int64)

    sel = config.selection
    if sel in ("closest2", "closest3", "closest4", "random3", "closest_vertex"):
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        k = {"closest2": 2, "closest3": 3, "closest4": 4, "closest_vertex": 1}.get(sel)
        for v in range(n):
            cand = neighborhood(seed_of[v])
            if sel == "random3":
                pick = np.sort(rng.choice(cand, size=min(3, cand.size), replace=False))
                c, w = _idw_row(fpos[v], pick, cpos, 3, delta)
            else:
                c, w = _idw_row(fpos[v], cand, cpos, k, delta)
                if k == 1:
                    w = np.ones(1)
            emit(v, c, w)
        P = finalize(sp.coo_matrix((vals, (rows, cols)), shape=(n, m)))
        return P, 0.0, candidate_triangles(coarse_edges)

    if sel == "all_triangles":
        tri_ptr, tri_ids, tris = _fan_triangles(coarse_nbrs, m)
    else:
        tris = candidate_triangles(coarse_edges)
        tri_ptr, tri_ids = _incidence(tris, m)
    if tris.shape[0]:
        ok = _triangle_area(cpos, tris) > area_tol
        keep = ok[tri_ids]
        tri_ptr = np.concatenate([[0], np.cumsum(keep)])[tri_ptr].astype(np.int64)
        tri_ids = tri_ids[keep]
        best, bary, dist2 = _best_triangles(fpos, cpos, seed_of, tri_ptr, tri_ids, tris, area_tol)
    else:
        best = np.full(n, -1, dtype=np.int64)
        bary = np.zeros((n, 3))
        dist2 = np.full(n, np.inf)

    # a projection that collapses onto a coarse point other than the vertex's own
    # seed means the vertex lies beyond the triangle fan around that seed
    fallback = best < 0
    if tris.shape[0]:
        snapped = bary.max(axis=1) >= 1.0 - SNAP_WEIGHT
        corner = tris[np.maximum(best, 0), np.argmax(bary, axis=1)]
        fallback |= snapped & (corner != seed_of)
    for v in range(n):
        if fallback[v]:
            c, w = _idw_row(fpos[v], neighborhood(seed_of[v]), cpos, 3, delta)
        else:
            c = tris[best[v]]
            if config.weighting == "barycentric":
                w = bary[v]
            elif config.weighting == "uniform":
                w = np.full(3, 1.0 / 3.0)
            else:
                c, w = _idw_row(fpos[v], c, cpos, 3, delta)
        emit(v, c, w)
    P = finalize(sp.coo_matrix((vals, (rows, cols)), shape=(n, m)))
    return P, float(fallback.mean()) if n else 0.0, tris


# --- full hierarchy ---------------------------------------------------------------

def _sample(graph, config, rng):
    if config.sampling == "gravo":
        return sample_points(graph, config.phi, config.ring_limit)
    if config.sampling == "random":
        return sample_random(graph, config.phi, rng)
    if config.sampling == "fps":
        return sample_fps(graph, config.phi)
    return sample_mis(graph, config.phi)


def coarsen(graph: SurfaceGraph, config: HierarchyConfig, rng=None):
    """One coarsening step; returns ``(coarse_graph, P, fallback_fraction, partition, triangles)``."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    seeds = _sample(graph, config, rng)
    part = graph_voronoi(graph, seeds)
    cedges = voronoi_adjacency(graph, part)
    cpos = shift_seeds(part, graph.positions) if config.shift_seeds else graph.positions[seeds]
    P, frac, tris = build_prolongation(graph, part, cedges, config, coarse_positions=cpos, rng=rng)
    return SurfaceGraph.from_edges(cpos, cedges), P, frac, part, tris


def build_hierarchy(graph: SurfaceGraph, config: HierarchyConfig | None = None) -> Hierarchy:
    """Coarsen until a level has at most ``config.coarsest_size`` vertices or stops shrinking."""
    config = config or HierarchyConfig()
    if graph.n_vertices == 0:
        raise ValueError("cannot build a hierarchy on an empty graph")
    rng = np.random.default_rng(config.seed)
    h = Hierarchy(levels=[graph], seconds=[0.0])
    while h.levels[-1].n_vertices > config.coarsest_size:
        t0 = time.perf_counter()
        fine = h.levels[-1]
        coarse, P, frac, part, tris = coarsen(fine, config, rng)
        if coarse.n_vertices >= fine.n_vertices:
            break
        h.levels.append(coarse)
        h.prolongations.append(P)
        h.fallback_fraction.append(frac)
        h.partitions.append(part)
        h.triangles.append(tris)
        h.seconds.append(time.perf_counter() - t0)
        log.debug("level %d: %d -> %d vertices, fallback %.4f", h.n_levels - 1,
                  fine.n_vertices, coarse.n_vertices, frac)
    return h
