"""Procedural test surfaces: icospheres, tori, perturbed copies and point samples."""

from __future__ import annotations

import numpy as np

from .mesh_io import PointCloud, TriangleMesh


def icosahedron() -> TriangleMesh:
    t = (1.0 + 5.0**0.5) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return TriangleMesh(v / np.linalg.norm(v, axis=1, keepdims=True), f)


def subdivide(mesh: TriangleMesh, project_to_sphere: bool = False) -> TriangleMesh:
    """Split every triangle into four at its edge midpoints."""
    pos = list(mesh.positions)
    midpoint = {}

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in midpoint:
            midpoint[key] = len(pos)
            pos.append(0.5 * (mesh.positions[a] + mesh.positions[b]))
        return midpoint[key]

    faces = []
    for a, b, c in mesh.faces.tolist():
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    pos = np.array(pos)
    if project_to_sphere:
        pos /= np.linalg.norm(pos, axis=1, keepdims=True)
    return TriangleMesh(pos, np.array(faces))


def icosphere(subdivisions: int) -> TriangleMesh:
    """Unit sphere with ``10 * 4**s + 2`` vertices."""
    mesh = icosahedron()
    for _ in range(subdivisions):
        mesh = subdivide(mesh, project_to_sphere=True)
    return mesh


def torus(n_major: int = 48, n_minor: int = 16, major: float = 1.0, minor: float = 0.35) -> TriangleMesh:
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pos = np.stack([(major + minor * np.cos(vv)) * np.cos(uu),
                    (major + minor * np.cos(vv)) * np.sin(uu),
                    minor * np.sin(vv)], axis=-1).reshape(-1, 3)
    idx = np.arange(n_major * n_minor).reshape(n_major, n_minor)
    a = idx
    b = np.roll(idx, -1, axis=0)
    c = np.roll(np.roll(idx, -1, axis=0), -1, axis=1)
    d = np.roll(idx, -1, axis=1)
    faces = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)])
    return TriangleMesh(pos, faces)


def perturbed(mesh: TriangleMesh, sigma: float, seed: int = 0) -> TriangleMesh:
    """Copy of ``mesh`` with Gaussian noise of ``sigma`` times the mean edge length."""
    f = mesh.faces
    p = mesh.positions
    mean_edge = np.mean(np.linalg.norm(p[f[:, 0]] - p[f[:, 1]], axis=1))
    rng = np.random.default_rng(seed)
    return TriangleMesh(p + sigma * mean_edge * rng.standard_normal(p.shape), f)


def sphere_cloud(n: int, seed: int = 0, noise: float = 0.0) -> PointCloud:
    rng = np.random.default_rng(seed)
    p = rng.standard_normal((n, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    if noise:
        p *= 1.0 + noise * rng.standard_normal((n, 1))
    return PointCloud(p)


def torus_cloud(n: int, seed: int = 0, major: float = 1.0, minor: float = 0.35) -> PointCloud:
    rng = np.random.default_rng(seed)
    u = rng.uniform(0, 2 * np.pi, n)
    v = rng.uniform(0, 2 * np.pi, n)
    return PointCloud(np.column_stack([(major + minor * np.cos(v)) * np.cos(u),
                                       (major + minor * np.cos(v)) * np.sin(u),
                                       minor * np.sin(v)]))


def grid_cloud(nx: int, ny: int, seed: int = 0, jitter: float = 0.2) -> PointCloud:
    """Jittered planar grid with a gentle height field."""
    rng = np.random.default_rng(seed)
    x, y = np.meshgrid(np.arange(nx, dtype=float), np.arange(ny, dtype=float), indexing="ij")
    x = x.ravel() + jitter * rng.uniform(-1, 1, x.size)
    y = y.ravel() + jitter * rng.uniform(-1, 1, y.size)
    z = 0.1 * nx * np.sin(x / nx * np.pi) * np.cos(y / ny * np.pi)
    return PointCloud(np.column_stack([x, y, z]) / max(nx, ny))
