"""Multigrid setup and V-cycle iteration."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .hierarchy import Hierarchy
from .sparse import CholeskySolver, check_diagonal, finalize, gauss_seidel, triple_product

NORMS = ("euclidean", "mass_weighted")


@dataclass(frozen=True)
class SolverConfig:
    nu_pre: int = 2
    nu_post: int = 2
    epsilon: float = 1e-4
    max_iterations: int = 100
    norm: str = "mass_weighted"

    def __post_init__(self):
        if self.nu_pre < 1 or self.nu_post < 1:
            raise ValueError("relaxation sweep counts must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    level_matrix_nnz: list[int] = field(default_factory=list)
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    iteration_seconds: list[float] = field(default_factory=list)

    def write_csv(self, path) -> None:
        """Convergence history: iteration, relative residual, cumulative seconds."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "relative_residual", "seconds"])
            for it, (res, sec) in enumerate(zip(self.residual_history, self.iteration_seconds)):
                w.writerow([it, f"{res:.9g}", f"{sec:.3f}"])


@dataclass(eq=False)
class MultigridOperator:
    matrices: list[sp.csr_matrix]
    prolongations: list[sp.csr_matrix]
    restrictions: list[sp.csr_matrix]
    coarse_solver: CholeskySolver
    mass_diagonal: np.ndarray | None = None
    setup_seconds: float = 0.0

    @property
    def n_levels(self) -> int:
        return len(self.matrices)

    @property
    def level_nnz(self) -> list[int]:
        return [A.nnz for A in self.matrices]


def setup(A, hierarchy: Hierarchy | list, mass_diagonal=None) -> MultigridOperator:
    """Restricted matrices ``A_{l+1} = P_l^T A_l P_l`` plus the coarsest factorization.

    ``hierarchy`` may be a :class:`Hierarchy` or a plain list of prolongation
    matrices.
    """
    t0 = time.perf_counter()
    prolongations = hierarchy.prolongations if isinstance(hierarchy, Hierarchy) else list(hierarchy)
    A = finalize(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("system matrix must be square")
    if prolongations and prolongations[0].shape[0] != A.shape[0]:
        raise ValueError(f"hierarchy has {prolongations[0].shape[0]} fine vertices, matrix has {A.shape[0]} rows")
    matrices = [A]
    for l, P in enumerate(prolongations):
        check_diagonal(matrices[-1], level=l + 1)
        if P.shape[0] != matrices[-1].shape[0]:
            raise ValueError(f"prolongation {l + 1} does not chain: {P.shape} after {matrices[-1].shape}")
        matrices.append(triple_product(P, matrices[-1]))
    check_diagonal(matrices[-1], level=len(matrices))
    coarse = CholeskySolver(matrices[-1])
    if mass_diagonal is not None:
        mass_diagonal = np.asarray(mass_diagonal, dtype=np.float64)
        if mass_diagonal.shape != (A.shape[0],):
            raise ValueError("mass diagonal has the wrong length")
    return MultigridOperator(matrices, list(prolongations), [finalize(P.T) for P in prolongations], coarse,
                             mass_diagonal, time.perf_counter() - t0)


def residual_norm(op: MultigridOperator, x, b, norm: str = "euclidean") -> float:
    r = b - op.matrices[0] @ x
    return vector_norm(op, r, norm)


def vector_norm(op: MultigridOperator, r, norm: str) -> float:
    if norm == "euclidean":
        return float(np.linalg.norm(r))
    if norm == "mass_weighted":
        if op.mass_diagonal is None:
            raise ValueError("mass-weighted norm requested but the operator has no mass diagonal")
        # residuals are integrated quantities; M^-1 turns them back into pointwise values
        return float(np.sqrt(np.dot(r, r / op.mass_diagonal)))
    raise ValueError(f"unknown norm {norm!r}")


def v_cycle(op: MultigridOperator, x, b, level: int = 0, nu_pre: int = 2, nu_post: int = 2) -> np.ndarray:
    """One V-cycle starting at ``level`` (0 is the finest)."""
    if level == op.n_levels - 1:
        return op.coarse_solver.solve(b)
    A = op.matrices[level]
    y = gauss_seidel(A, x, b, nu_pre, checked=False)
    r = op.restrictions[level] @ (b - A @ y)
    u = v_cycle(op, np.zeros(r.shape[0]), r, level + 1, nu_pre, nu_post)
    return gauss_seidel(A, y + op.prolongations[level] @ u, b, nu_post, checked=False)


def solve(op: MultigridOperator, b, x0=None, config: SolverConfig | None = None):
    """Repeat V-cycles until ``||Ax - b|| <= eps ||b||`` or the iteration cap.

    Returns ``(x, report)``; non-convergence is reported, not raised.
    """
    config = config or SolverConfig()
    b = np.asarray(b, dtype=np.float64)
    n = op.matrices[0].shape[0]
    if b.shape != (n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({n},)")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError("initial guess has the wrong length")

    t0 = time.perf_counter()
    bnorm = vector_norm(op, b, config.norm)
    scale = bnorm if bnorm > 0 else 1.0
    rel = residual_norm(op, x, b, config.norm) / scale
    report = SolveReport(residual_history=[rel], level_matrix_nnz=op.level_nnz,
                         setup_seconds=op.setup_seconds, iteration_seconds=[0.0])
    while rel > config.epsilon and report.iterations < config.max_iterations:
        x = v_cycle(op, x, b, 0, config.nu_pre, config.nu_post)
        rel = residual_norm(op, x, b, config.norm) / scale
        report.iterations += 1
        report.residual_history.append(rel)
        report.iteration_seconds.append(time.perf_counter() - t0)
    report.converged = bool(rel <= config.epsilon)
    report.solve_seconds = time.perf_counter() - t0
    return x, report


class MultigridSolver:
    """Convenience wrapper: hierarchy + system matrix -> reusable solver."""

    def __init__(self, A, hierarchy, mass_diagonal=None, config: SolverConfig | None = None):
        self.config = config or SolverConfig()
        if self.config.norm == "mass_weighted" and mass_diagonal is None:
            raise ValueError("mass-weighted convergence test needs the mass diagonal")
        self.op = setup(A, hierarchy, mass_diagonal)

    def solve(self, b, x0=None):
        return solve(self.op, b, x0, self.config)
