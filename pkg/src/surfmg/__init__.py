"""Geometric multigrid for Laplace-type systems on triangle meshes and point clouds."""

from .hierarchy import Hierarchy, HierarchyConfig, build_hierarchy
from .mesh_io import PointCloud, SurfaceGraph, TriangleMesh, knn_graph, load, mesh_to_graph
from .operators import OperatorPair, graph_laplacian, mesh_operators
from .solver import MultigridSolver, SolveReport, SolverConfig, setup, solve

__version__ = "0.1.0"

__all__ = [
    "Hierarchy", "HierarchyConfig", "build_hierarchy",
    "PointCloud", "SurfaceGraph", "TriangleMesh", "knn_graph", "load", "mesh_to_graph",
    "OperatorPair", "graph_laplacian", "mesh_operators",
    "MultigridSolver", "SolveReport", "SolverConfig", "setup", "solve",
]
