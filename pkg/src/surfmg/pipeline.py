"""Glue between files on disk and the solver: domains, problems, run manifests."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import operators
from .hierarchy import HierarchyConfig
from .mesh_io import PointCloud, SurfaceGraph, TriangleMesh, knn_graph, load, mesh_to_graph
from .solver import SolverConfig

PROBLEMS = ("poisson", "smoothing", "bilaplacian_smoothing")


class DegenerateInput(ValueError):
    """Input that loads but cannot carry a Laplacian (no faces, too few points, no edges)."""


def standard_normal(n: int, seed: int) -> np.ndarray:
    """N(0, 1) draws from the PCG64 raw 64-bit stream via the Box-Muller transform.

    Uniforms are ``((raw >> 11) + 1) * 2**-53`` so they lie in ``(0, 1]`` and
    the logarithm stays finite.
    """
    pairs = (n + 1) // 2
    raw = np.random.PCG64(seed).random_raw(2 * pairs)
    u = ((raw >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:n]


def read_vector(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.float64, ndmin=1)


def write_vector(path, x) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(x, dtype=np.float64):
            fh.write(f"{v:.17g}\n")


@dataclass
class Domain:
    """A loaded input with its level-1 graph and discrete operators."""

    source: TriangleMesh | PointCloud
    graph: SurfaceGraph
    ops: operators.OperatorPair
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.graph.n_vertices


def make_domain(source: TriangleMesh | PointCloud, knn: int = 8) -> Domain:
    diagnostics: dict = {}
    if isinstance(source, TriangleMesh):
        if source.n_vertices < 3 or source.n_faces == 0:
            raise DegenerateInput("mesh has no triangles")
        graph = mesh_to_graph(source)
        ops = operators.mesh_operators(source, diagnostics)
    else:
        if source.n_vertices < 2:
            raise DegenerateInput("point cloud needs at least 2 points")
        graph = knn_graph(source, min(knn, source.n_vertices - 1))
        ops = operators.graph_laplacian(graph, diagnostics)
    if graph.n_edges == 0:
        raise DegenerateInput("input has no edges")
    return Domain(source, graph, ops, diagnostics)


def load_domain(path, knn: int = 8) -> Domain:
    return make_domain(load(path), knn)


@dataclass
class ProblemSpec:
    kind: str = "poisson"
    alpha: float = 1e-3
    beta: float = 1e-6
    eta: float = 1e-6
    input_function: str | None = None

    def __post_init__(self):
        if self.kind not in PROBLEMS:
            raise ValueError(f"unknown problem {self.kind!r}")
        if self.alpha < 0 or self.beta < 0 or self.eta < 0:
            raise ValueError("problem weights must be non-negative")


def build_system(domain: Domain, problem: ProblemSpec, seed: int = 0):
    """Return ``(A, b, y)`` for the requested problem on ``domain``."""
    if problem.input_function:
        y = read_vector(problem.input_function)
        if y.shape != (domain.n,):
            raise ValueError(f"input function has {y.shape[0]} values, domain has {domain.n} vertices")
    else:
        y = standard_normal(domain.n, seed)
    A, b = operators.assemble(problem.kind, domain.ops, y, alpha=problem.alpha, beta=problem.beta,
                              eta=problem.eta)
    return A, b, y


@dataclass
class RunManifest:
    """Everything needed to repeat a run; stored as JSON next to its outputs."""

    input: str = ""
    out: str = "out"
    seed: int = 0
    knn: int = 8
    timings: bool = True
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    hierarchy: HierarchyConfig = field(default_factory=HierarchyConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
        problem = ProblemSpec(**d.pop("problem", {}))
        hierarchy = HierarchyConfig(**d.pop("hierarchy", {}))
        solver = SolverConfig(**d.pop("solver", {}))
        return cls(problem=problem, hierarchy=hierarchy, solver=solver, **d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def with_overrides(self, problem=None, hierarchy=None, solver=None, **top) -> "RunManifest":
        return replace(
            self,
            problem=replace(self.problem, **(problem or {})),
            hierarchy=replace(self.hierarchy, **(hierarchy or {})),
            solver=replace(self.solver, **(solver or {})),
            **top,
        )
