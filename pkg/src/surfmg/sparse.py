"""Compressed sparse row kernels used by the multigrid solver.

Matrices are plain ``scipy.sparse.csr_matrix`` objects kept in a canonical
form: sorted column indices, no duplicates, and no stored entries with
magnitude below ``DROP_TOL``.  The routines here add the few operations scipy
does not provide in the form the solver needs (forward Gauss-Seidel, a
checked dense Cholesky for the coarsest level, a symmetrized Galerkin
product).
"""

from __future__ import annotations

import numba
import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

DROP_TOL = 1e-14
DIAG_TOL = 1e-14
PIVOT_TOL = 1e-13


class ZeroDiagonal(ArithmeticError):
    """A relaxation would divide by a (near) zero diagonal entry."""

    def __init__(self, index: int, level: int | None = None):
        self.index = int(index)
        self.level = level
        where = f"row {self.index}" if level is None else f"level {level}, row {self.index}"
        super().__init__(f"zero diagonal entry at {where}")


class ZeroDiagonalAtLevel(ZeroDiagonal):
    """Zero diagonal found in a restricted matrix during solver setup."""

    def __init__(self, level: int, index: int):
        super().__init__(index, level=level)


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


def finalize(A) -> sp.csr_matrix:
    """Return ``A`` as canonical CSR (float64, sorted, deduplicated, small entries dropped)."""
    A = sp.csr_matrix(A, dtype=np.float64, copy=True)
    A.sum_duplicates()
    A.data[np.abs(A.data) < DROP_TOL] = 0.0
    A.eliminate_zeros()
    A.sort_indices()
    return A


def from_dense(D) -> sp.csr_matrix:
    return finalize(sp.csr_matrix(np.asarray(D, dtype=np.float64)))


def spmv(A: sp.csr_matrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    return A @ x


def transpose(A: sp.csr_matrix) -> sp.csr_matrix:
    return finalize(A.T)


def triple_product(P: sp.csr_matrix, A: sp.csr_matrix) -> sp.csr_matrix:
    """Galerkin product ``P^T A P``.

    When ``A`` is symmetric the result is averaged with its transpose so that
    round-off asymmetry does not accumulate over levels.
    """
    if not (P.shape[0] == A.shape[0] == A.shape[1]):
        raise ValueError(f"dimension mismatch: P is {P.shape}, A is {A.shape}")
    C = finalize(P.T @ (A @ P))
    if is_symmetric(A, tol=1e-12):
        C = finalize(0.5 * (C + C.T))
    return C


def is_symmetric(A: sp.csr_matrix, tol: float = 1e-10) -> bool:
    if A.shape[0] != A.shape[1]:
        return False
    norm = sp.linalg.norm(A)
    if norm == 0.0:
        return True
    return sp.linalg.norm(A - A.T) <= tol * norm


@numba.njit(cache=True)
def _gs_sweeps(indptr, indices, data, x, b, sweeps):
    n = x.shape[0]
    for _ in range(sweeps):
        for i in range(n):
            diag = 0.0
            acc = b[i]
            for jj in range(indptr[i], indptr[i + 1]):
                j = indices[jj]
                if j == i:
                    diag = data[jj]
                else:
                    acc -= data[jj] * x[j]
            x[i] = acc / diag


def check_diagonal(A: sp.csr_matrix, level: int | None = None) -> np.ndarray:
    """Return the diagonal of ``A``; raise if any entry is numerically zero."""
    d = A.diagonal()
    bad = np.flatnonzero(np.abs(d) <= DIAG_TOL)
    if bad.size:
        if level is None:
            raise ZeroDiagonal(bad[0])
        raise ZeroDiagonalAtLevel(level, bad[0])
    return d


def gauss_seidel(A: sp.csr_matrix, x, b, sweeps: int, *, checked: bool = True) -> np.ndarray:
    """Forward Gauss-Seidel sweeps in ascending row order.

    Returns a new vector; ``x`` is not modified.  Set ``checked=False`` only
    when the diagonal has already been validated (the solver does this once
    at setup).
    """
    if A.shape[0] != A.shape[1]:
        raise ValueError("Gauss-Seidel needs a square matrix")
    if checked:
        check_diagonal(A)
    out = np.array(x, dtype=np.float64, copy=True)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if out.shape[0] != A.shape[0] or b.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch in Gauss-Seidel")
    _gs_sweeps(A.indptr, A.indices, A.data, out, b, int(sweeps))
    return out


class CholeskySolver:
    """Dense Cholesky factorization reused across right-hand sides."""

    def __init__(self, A):
        D = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        if D.shape[0] != D.shape[1]:
            raise ValueError("Cholesky needs a square matrix")
        self.n = D.shape[0]
        if self.n == 0:
            self.factor = np.zeros((0, 0))
            return
        try:
            L = scipy.linalg.cholesky(D, lower=True, check_finite=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from exc
        pivots = np.diag(L) ** 2
        limit = PIVOT_TOL * np.max(np.abs(np.diag(D)))
        if np.any(pivots <= limit):
            i = int(np.argmin(pivots))
            raise NotPositiveDefinite(f"pivot {pivots[i]:.3e} at row {i} below {limit:.3e}")
        self.factor = L

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise ValueError("dimension mismatch in Cholesky solve")
        if self.n == 0:
            return b.copy()
        return scipy.linalg.cho_solve((self.factor, True), b)


def dense_cholesky_solve(A, b) -> np.ndarray:
    return CholeskySolver(A).solve(b)


def write_mtx(path, A: sp.csr_matrix) -> None:
    scipy.io.mmwrite(str(path), A, precision=17)


def read_mtx(path) -> sp.csr_matrix:
    return finalize(scipy.io.mmread(str(path)))
