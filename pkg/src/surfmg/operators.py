"""Stiffness and mass operators, and the benchmark linear systems built from them.

Stiffness matrices use the positive semidefinite convention: off-diagonal
entries are negative and every row sums to zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh_io import SurfaceGraph, TriangleMesh
from .sparse import finalize

log = logging.getLogger(__name__)

COT_CLAMP = 1e6
DEGENERATE_AREA = 1e-12
MAX_GRAPH_WEIGHT = 1e12


@dataclass(frozen=True)
class OperatorPair:
    stiffness: sp.csr_matrix
    mass: np.ndarray

    def __post_init__(self):
        n = self.mass.shape[0]
        if self.mass.ndim != 1 or self.stiffness.shape != (n, n):
            raise ValueError(f"stiffness {self.stiffness.shape} does not match mass of length {n}")

    @property
    def n(self) -> int:
        return self.mass.shape[0]


def _bump(diagnostics, key, count):
    if diagnostics is not None and count:
        diagnostics[key] = diagnostics.get(key, 0) + int(count)


def cotan_laplacian(mesh: TriangleMesh, diagnostics: dict | None = None) -> sp.csr_matrix:
    """Cotangent Laplacian, ``S_ij = -(cot a_ij + cot b_ij) / 2``.

    Cotangents are clamped to ``[-COT_CLAMP, COT_CLAMP]``; faces whose area is
    below ``DEGENERATE_AREA`` times the squared mean edge length are counted
    in ``diagnostics["degenerate_faces"]``.
    """
    p = mesh.positions
    f = mesh.faces
    n = mesh.n_vertices
    if f.shape[0] == 0:
        return sp.csr_matrix((n, n))
    rows, cols, vals = [], [], []
    e_len = []
    for a in range(3):
        i, j, k = f[:, a], f[:, (a + 1) % 3], f[:, (a + 2) % 3]
        # angle at k is opposite edge (i, j)
        u = p[i] - p[k]
        v = p[j] - p[k]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        dot = np.einsum("ij,ij->i", u, v)
        with np.errstate(divide="ignore", invalid="ignore"):
            cot = dot / cross
        cot = np.where(np.isfinite(cot), cot, np.sign(dot) * COT_CLAMP)
        cot = np.clip(cot, -COT_CLAMP, COT_CLAMP)
        w = -0.5 * cot
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
        e_len.append(np.linalg.norm(p[i] - p[j], axis=1))
    area = 0.5 * np.linalg.norm(np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]]), axis=1)
    mean_edge = float(np.mean(np.concatenate(e_len)))
    n_bad = int(np.sum(area < DEGENERATE_AREA * mean_edge**2))
    if n_bad:
        log.warning("%d degenerate faces in cotan assembly", n_bad)
    _bump(diagnostics, "degenerate_faces", n_bad)
    off = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    off.sum_duplicates()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return finalize(off + sp.diags(diag))


def _fix_isolated(mass, diagnostics):
    bad = mass <= 0
    if bad.any():
        positive = mass[~bad]
        floor = (positive.min() if positive.size else 1.0) * 1e-3
        mass = mass.copy()
        mass[bad] = floor
        log.warning("%d vertices without area; mass set to %.3g", int(bad.sum()), floor)
        _bump(diagnostics, "isolated_vertices", int(bad.sum()))
    return mass


def lumped_mass(mesh: TriangleMesh, diagnostics: dict | None = None) -> np.ndarray:
    """One third of the incident triangle area at each vertex."""
    p = mesh.positions
    f = mesh.faces
    area = 0.5 * np.linalg.norm(np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]]), axis=1)
    mass = np.zeros(mesh.n_vertices)
    for a in range(3):
        np.add.at(mass, f[:, a], area / 3.0)
    return _fix_isolated(mass, diagnostics)


def mesh_operators(mesh: TriangleMesh, diagnostics: dict | None = None) -> OperatorPair:
    return OperatorPair(cotan_laplacian(mesh, diagnostics), lumped_mass(mesh, diagnostics))


def graph_laplacian(graph: SurfaceGraph, diagnostics: dict | None = None) -> OperatorPair:
    """Inverse-distance graph Laplacian with a squared-edge-length mass heuristic.

    Used for point clouds, where no triangles are available.
    """
    if graph.n_edges == 0:
        raise ValueError("graph Laplacian needs at least one edge")
    n = graph.n_vertices
    e = graph.edges
    length = np.linalg.norm(graph.positions[e[:, 0]] - graph.positions[e[:, 1]], axis=1)
    with np.errstate(divide="ignore"):
        w = np.minimum(1.0 / length, MAX_GRAPH_WEIGHT)
    _bump(diagnostics, "coincident_edges", int(np.sum(length == 0)))
    off = sp.coo_matrix((np.concatenate([-w, -w]), (np.concatenate([e[:, 0], e[:, 1]]),
                                                    np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n)).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    stiffness = finalize(off + sp.diags(diag))
    mass = np.zeros(n)
    np.add.at(mass, e[:, 0], length**2 / 6.0)
    np.add.at(mass, e[:, 1], length**2 / 6.0)
    return OperatorPair(stiffness, _fix_isolated(mass, diagnostics))


def _check_rhs(ops: OperatorPair, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (ops.n,):
        raise ValueError(f"dimension mismatch: expected vector of length {ops.n}, got shape {y.shape}")
    return y


def assemble_poisson(ops: OperatorPair, eta: float, y):
    """``(S + eta M) x = M y``."""
    if not eta > 0:
        raise ValueError("Poisson system needs eta > 0")
    y = _check_rhs(ops, y)
    return finalize(ops.stiffness + eta * sp.diags(ops.mass)), ops.mass * y


def assemble_smoothing(ops: OperatorPair, alpha: float, y):
    """``(M + alpha S) x = M y``."""
    if alpha < 0:
        raise ValueError("smoothing weight must be non-negative")
    y = _check_rhs(ops, y)
    return finalize(sp.diags(ops.mass) + alpha * ops.stiffness), ops.mass * y


def assemble_bilaplacian(ops: OperatorPair, alpha: float, beta: float, y):
    """Normal equations ``(M + alpha S + beta S M^-1 S) x = M y``."""
    if alpha < 0 or beta < 0:
        raise ValueError("smoothing weights must be non-negative")
    if np.any(ops.mass <= 0):
        raise ValueError("mass matrix must be positive")
    y = _check_rhs(ops, y)
    S = ops.stiffness
    A = sp.diags(ops.mass) + alpha * S
    if beta != 0:
        B = S @ sp.diags(1.0 / ops.mass) @ S
        A = A + beta * 0.5 * (B + B.T)
    return finalize(A), ops.mass * y


def assemble(kind: str, ops: OperatorPair, y, *, alpha: float = 1e-3, beta: float = 0.0, eta: float = 1e-6):
    if kind == "poisson":
        return assemble_poisson(ops, eta, y)
    if kind == "smoothing":
        return assemble_smoothing(ops, alpha, y)
    if kind == "bilaplacian_smoothing":
        return assemble_bilaplacian(ops, alpha, beta, y)
    raise ValueError(f"unknown problem kind {kind!r}")
