"""Triangle meshes, point clouds and their neighbor graphs.

Indices are 0-based everywhere inside the package; OBJ files are 1-based and
converted at the file boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)


class MeshFormatError(ValueError):
    """Malformed or unsupported mesh file."""


@dataclass(frozen=True)
class TriangleMesh:
    positions: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        faces = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        n = pos.shape[0]
        if faces.size:
            if faces.min() < 0 or faces.max() >= n:
                raise IndexError(f"face index out of range for {n} vertices")
            if np.any((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])):
                raise ValueError("face repeats a vertex index")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "faces", faces)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]


@dataclass(frozen=True)
class PointCloud:
    positions: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if pos.shape[0] == 0:
            raise ValueError("point cloud is empty")
        if not np.all(np.isfinite(pos)):
            raise ValueError("point cloud has non-finite coordinates")
        object.__setattr__(self, "positions", pos)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True, eq=False)
class SurfaceGraph:
    """Points plus an undirected edge set.

    ``edges`` is an (m, 2) array of unique pairs with ``i < j`` in
    lexicographic order.  ``indptr``/``indices`` hold the sorted adjacency
    lists in CSR layout, and ``lengths`` the matching Euclidean edge lengths.
    """

    positions: np.ndarray
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, positions, edges) -> "SurfaceGraph":
        pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
        n = pos.shape[0]
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise IndexError("edge index out of range")
        e = np.sort(e, axis=1)
        e = e[e[:, 0] != e[:, 1]]
        e = np.unique(e, axis=0) if e.size else np.zeros((0, 2), dtype=np.int64)
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        lengths = np.linalg.norm(pos[src] - pos[dst], axis=1)
        return cls(pos, e, indptr, dst, lengths)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_lengths(self, i: int) -> np.ndarray:
        return self.lengths[self.indptr[i]:self.indptr[i + 1]]

    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n_vertices)]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)


def mesh_to_graph(mesh: TriangleMesh) -> SurfaceGraph:
    f = mesh.faces
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]) if f.size else np.zeros((0, 2), np.int64)
    return SurfaceGraph.from_edges(mesh.positions, edges)


def knn_graph(cloud: PointCloud, k: int = 8) -> SurfaceGraph:
    """Symmetrized k-nearest-neighbor graph (Euclidean, ties to the lower index)."""
    pos = cloud.positions
    n = pos.shape[0]
    if n < 2:
        raise ValueError("k-NN graph needs at least 2 points")
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}, got {k}")
    tree = cKDTree(pos)
    pad = min(n, k + 1 + 4)
    while True:
        dist, idx = tree.query(pos, k=pad)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        # a tie may straddle the query boundary; widen until the k-th distance is strictly inside
        if pad == n or np.all(dist[:, k] < dist[:, -1]):
            break
        pad = min(n, 2 * pad)
    rows = []
    for i in range(n):
        cand = [(d, j) for d, j in zip(dist[i], idx[i]) if j != i]
        cand.sort()
        rows.extend((i, j) for _, j in cand[:k])
    return SurfaceGraph.from_edges(pos, np.array(rows, dtype=np.int64))


def average_edge_length(graph: SurfaceGraph) -> float:
    if graph.n_edges == 0:
        raise ValueError("graph has no edges")
    e = graph.edges
    return float(np.mean(np.linalg.norm(graph.positions[e[:, 0]] - graph.positions[e[:, 1]], axis=1)))


# --- OBJ -------------------------------------------------------------------

def load_obj(path) -> TriangleMesh:
    """Read an ASCII OBJ; polygons are fan-triangulated, normals and texcoords ignored."""
    verts, records = [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                try:
                    coords = [float(t) for t in parts[1:4]]
                except ValueError:
                    raise MeshFormatError(f"{path}:{lineno}: bad vertex record") from None
                if len(coords) != 3:
                    raise MeshFormatError(f"{path}:{lineno}: vertex needs 3 coordinates")
                verts.append(coords)
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    try:
                        k = int(tok.split("/")[0])
                    except ValueError:
                        raise MeshFormatError(f"{path}:{lineno}: bad face index {tok!r}") from None
                    # negative indices count back from the vertices read so far
                    idx.append(k - 1 if k > 0 else len(verts) + k)
                if len(idx) < 3:
                    raise MeshFormatError(f"{path}:{lineno}: face needs at least 3 vertices")
                records.append((lineno, idx))
    n = len(verts)
    faces = []
    for lineno, idx in records:
        for k in idx:
            if not 0 <= k < n:
                raise IndexError(f"{path}:{lineno}: face index {k + 1} out of range ({n} vertices)")
        faces.extend((idx[0], idx[a], idx[a + 1]) for a in range(1, len(idx) - 1))
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), _drop_repeated(faces, path))


def _drop_repeated(faces, path) -> np.ndarray:
    f = np.array(faces, dtype=np.int64).reshape(-1, 3)
    bad = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
    if bad.any():
        log.warning("%s: dropped %d faces that repeat a vertex", path, int(bad.sum()))
    return f[~bad]


def write_obj(path, positions, faces=None) -> None:
    """Write vertices (and optional triangles) as ASCII OBJ."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    with open(path, "w", encoding="utf-8") as fh:
        for p in positions:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        if faces is not None:
            for f in np.asarray(faces, dtype=np.int64).reshape(-1, 3):
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


# --- PLY -------------------------------------------------------------------

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply_header(fh, path):
    magic = fh.readline().strip()
    if magic != b"ply":
        raise MeshFormatError(f"{path}: not a PLY file")
    fmt = None
    elements = []
    while True:
        raw = fh.readline()
        if not raw:
            raise MeshFormatError(f"{path}: missing end_header")
        parts = raw.decode("ascii", errors="replace").split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "end_header":
            break
        if parts[0] == "format":
            if len(parts) < 2:
                raise MeshFormatError(f"{path}: malformed format line")
            fmt = parts[1]
            if fmt not in ("ascii", "binary_little_endian"):
                raise MeshFormatError(f"{path}: unsupported PLY format {fmt}")
        elif parts[0] == "element":
            try:
                elements.append({"name": parts[1], "count": int(parts[2]), "props": []})
            except (IndexError, ValueError):
                raise MeshFormatError(f"{path}: malformed element line") from None
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError(f"{path}: property before element")
            if len(parts) >= 5 and parts[1] == "list":
                if parts[2] not in _PLY_TYPES or parts[3] not in _PLY_TYPES:
                    raise MeshFormatError(f"{path}: unsupported property type in {raw!r}")
                elements[-1]["props"].append((parts[4], "list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]]))
            elif len(parts) == 3:
                if parts[1] not in _PLY_TYPES:
                    raise MeshFormatError(f"{path}: unsupported property type {parts[1]}")
                elements[-1]["props"].append((parts[2], "scalar", _PLY_TYPES[parts[1]], None))
            else:
                raise MeshFormatError(f"{path}: malformed property line")
        else:
            raise MeshFormatError(f"{path}: unexpected header line {raw!r}")
    if fmt is None:
        raise MeshFormatError(f"{path}: missing format line")
    return fmt, elements


def _check_vertex_element(el, path):
    names = [p[0] for p in el["props"]]
    for axis in "xyz":
        if axis not in names:
            raise MeshFormatError(f"{path}: vertex element lacks property {axis}")
    for name, kind, t, _ in el["props"]:
        if kind == "list":
            raise MeshFormatError(f"{path}: unsupported list property {name} on vertex")
        if name in "xyz" and t not in ("f4", "f8"):
            raise MeshFormatError(f"{path}: unsupported property type for {name}; float expected")


def _read_ascii_element(lines, el, path):
    rows = []
    for _ in range(el["count"]):
        line = next(lines, None)
        if line is None:
            raise MeshFormatError(f"{path}: body ends before {el['count']} {el['name']} records")
        tokens = line.split()
        rec, pos = {}, 0
        try:
            for name, kind, t, t2 in el["props"]:
                if kind == "scalar":
                    rec[name] = float(tokens[pos])
                    pos += 1
                else:
                    cnt = int(tokens[pos])
                    rec[name] = [int(float(v)) for v in tokens[pos + 1:pos + 1 + cnt]]
                    if len(rec[name]) != cnt:
                        raise IndexError
                    pos += 1 + cnt
        except (IndexError, ValueError):
            raise MeshFormatError(f"{path}: malformed {el['name']} record {line.strip()!r}") from None
        rows.append(rec)
    return rows


def _read_binary_element(buf, offset, el, path):
    props = el["props"]
    count = el["count"]
    if all(kind == "scalar" for _, kind, _, _ in props):
        dt = np.dtype([(name, "<" + t) for name, _, t, _ in props])
        need = dt.itemsize * count
        if offset + need > len(buf):
            raise MeshFormatError(f"{path}: body ends before {count} {el['name']} records")
        arr = np.frombuffer(buf, dtype=dt, count=count, offset=offset)
        return arr, offset + need
    rows = []
    for _ in range(count):
        rec = {}
        for name, kind, t, t2 in props:
            if kind == "scalar":
                dt = np.dtype("<" + t)
                if offset + dt.itemsize > len(buf):
                    raise MeshFormatError(f"{path}: body ends before {count} {el['name']} records")
                rec[name] = np.frombuffer(buf, dt, 1, offset)[0]
                offset += dt.itemsize
            else:
                ct, it = np.dtype("<" + t), np.dtype("<" + t2)
                if offset + ct.itemsize > len(buf):
                    raise MeshFormatError(f"{path}: body ends before {count} {el['name']} records")
                cnt = int(np.frombuffer(buf, ct, 1, offset)[0])
                offset += ct.itemsize
                if offset + cnt * it.itemsize > len(buf):
                    raise MeshFormatError(f"{path}: body ends before {count} {el['name']} records")
                rec[name] = np.frombuffer(buf, it, cnt, offset).astype(np.int64).tolist()
                offset += cnt * it.itemsize
        rows.append(rec)
    return rows, offset


def _faces_from_lists(lists, n, path):
    faces = []
    for idx in lists:
        if len(idx) < 3:
            raise MeshFormatError(f"{path}: face with fewer than 3 vertices")
        for k in idx:
            if not 0 <= k < n:
                raise IndexError(f"{path}: face index {k} out of range ({n} vertices)")
        for a in range(1, len(idx) - 1):
            faces.append((idx[0], idx[a], idx[a + 1]))
    return _drop_repeated(faces, path)


def load_ply(path) -> TriangleMesh | PointCloud:
    """Read an ASCII or binary little-endian PLY.

    Returns a ``PointCloud`` when the file has no ``face`` element (or an
    empty one is absent), a ``TriangleMesh`` otherwise.
    """
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh, path)
        body = fh.read()
    names = [el["name"] for el in elements]
    if "vertex" not in names:
        raise MeshFormatError(f"{path}: no vertex element")
    _check_vertex_element(elements[names.index("vertex")], path)
    face_el = elements[names.index("face")] if "face" in names else None
    if face_el is not None:
        lists = [p for p in face_el["props"] if p[1] == "list"]
        if len(lists) != 1:
            raise MeshFormatError(f"{path}: face element needs exactly one list property")

    data = {}
    if fmt == "ascii":
        lines = iter(body.decode("ascii", errors="replace").splitlines())
        lines = (ln for ln in lines if ln.strip())
        for el in elements:
            data[el["name"]] = _read_ascii_element(lines, el, path)
        if next(lines, None) is not None:
            raise MeshFormatError(f"{path}: trailing data after declared elements")
        verts = np.array([[r["x"], r["y"], r["z"]] for r in data["vertex"]], dtype=np.float64).reshape(-1, 3)
    else:
        offset = 0
        for el in elements:
            data[el["name"]], offset = _read_binary_element(body, offset, el, path)
        if offset != len(body):
            raise MeshFormatError(f"{path}: body size does not match header")
        v = data["vertex"]
        verts = np.column_stack([np.asarray(v["x"], np.float64), np.asarray(v["y"], np.float64),
                                 np.asarray(v["z"], np.float64)])

    if face_el is None:
        return PointCloud(verts)
    list_name = [p[0] for p in face_el["props"] if p[1] == "list"][0]
    faces = _faces_from_lists([r[list_name] for r in data["face"]], verts.shape[0], path)
    return TriangleMesh(verts, faces)


def write_ply(path, positions, faces=None, binary: bool = True) -> None:
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    header = ["ply", "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {positions.shape[0]}",
              "property double x", "property double y", "property double z"]
    if faces is not None:
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        header += [f"element face {faces.shape[0]}", "property list uchar int vertex_indices"]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(positions.astype("<f8").tobytes())
            if faces is not None:
                rec = np.zeros(faces.shape[0], dtype=[("n", "u1"), ("v", "<i4", (3,))])
                rec["n"] = 3
                rec["v"] = faces
                fh.write(rec.tobytes())
        else:
            for p in positions:
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n".encode("ascii"))
            if faces is not None:
                for f in faces:
                    fh.write(f"3 {f[0]} {f[1]} {f[2]}\n".encode("ascii"))


def load(path) -> TriangleMesh | PointCloud:
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        return load_obj(path)
    if suffix == ".ply":
        return load_ply(path)
    raise MeshFormatError(f"{path}: unknown mesh format {suffix!r}")
