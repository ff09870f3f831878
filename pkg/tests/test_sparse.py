import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from surfmg.sparse import (CholeskySolver, NotPositiveDefinite, ZeroDiagonal, dense_cholesky_solve, finalize,
                           from_dense, gauss_seidel, is_symmetric, read_mtx, spmv, transpose, triple_product,
                           write_mtx)


def _random_spd(n, rng):
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


class TestSpmv:
    def test_identity(self):
        x = np.array([1.0, -2.0, 3.5])
        np.testing.assert_array_equal(spmv(sp.identity(3, format="csr"), x), x)

    def test_zero_matrix(self):
        assert not spmv(sp.csr_matrix((4, 4)), np.ones(4)).any()

    def test_hand_product(self):
        np.testing.assert_array_equal(spmv(from_dense([[2, 1], [0, 3]]), np.ones(2)), [3.0, 3.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            spmv(sp.identity(3, format="csr"), np.ones(4))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_matches_dense(self, m, n, seed):
        rng = np.random.default_rng(seed)
        D = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.4)
        x = rng.standard_normal(n)
        np.testing.assert_allclose(spmv(from_dense(D), x), D @ x, rtol=1e-13, atol=1e-13)


class TestTranspose:
    def test_involution_and_symmetric(self):
        rng = np.random.default_rng(1)
        A = from_dense(rng.standard_normal((5, 7)))
        assert abs(transpose(transpose(A)) - A).max() == 0.0
        S = from_dense(_random_spd(5, rng))
        assert abs(transpose(S) - S).max() == 0.0

    def test_single_entry_moves(self):
        A = sp.csr_matrix(([4.0], ([0], [2])), shape=(2, 3))
        T = transpose(A)
        assert T.shape == (3, 2)
        assert T.tocoo().row.tolist() == [2] and T.tocoo().col.tolist() == [0]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_adjoint_identity(m, n, seed):
    rng = np.random.default_rng(seed)
    A = finalize(sp.random(m, n, density=0.3, random_state=rng))
    x, y = rng.standard_normal(n), rng.standard_normal(m)
    lhs, rhs = spmv(transpose(A), y) @ x, spmv(A, x) @ y
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, np.abs(A.data).sum() * np.abs(x).max() * np.abs(y).max())


class TestTripleProduct:
    def test_identity_prolongation(self):
        A = from_dense(_random_spd(5, np.random.default_rng(2)))
        assert abs(triple_product(sp.identity(5, format="csr"), A) - A).max() < 1e-14

    def test_ones_column_sums_entries(self):
        n = 7
        C = triple_product(sp.csr_matrix(np.ones((n, 1))), sp.identity(n, format="csr"))
        assert C.shape == (1, 1) and C[0, 0] == n

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        A = _random_spd(6, rng)
        P = rng.standard_normal((6, 3))
        dense = P.T @ A @ P
        C = triple_product(from_dense(P), from_dense(A)).toarray()
        assert np.linalg.norm(C - dense) <= 1e-12 * np.linalg.norm(dense)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 50), st.integers(1, 20), st.booleans(), st.integers(0, 2**32 - 1))
    def test_random_instances_match_dense(self, n, m, symmetric, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.3)
        if symmetric:
            A = A + A.T
        P = rng.standard_normal((n, m)) * (rng.random((n, m)) < 0.5)
        dense = P.T @ A @ P
        C = triple_product(from_dense(P), from_dense(A)).toarray()
        assert np.linalg.norm(C - dense) <= 1e-12 * max(np.linalg.norm(dense), 1e-300) + 1e-13

    def test_nonsymmetric_is_not_symmetrized(self):
        A = from_dense([[2.0, 1.0], [0.0, 2.0]])
        C = triple_product(sp.identity(2, format="csr"), A)
        assert C[0, 1] == 1.0 and C[1, 0] == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            triple_product(sp.csr_matrix((4, 2)), sp.identity(3, format="csr"))


class TestGaussSeidel:
    def test_diagonal_one_sweep_is_exact(self):
        A = sp.diags([2.0, 4.0, 8.0], format="csr")
        x = gauss_seidel(A, np.zeros(3), np.array([2.0, 2.0, 2.0]), 1)
        np.testing.assert_array_equal(x, [1.0, 0.5, 0.25])

    def test_hand_sweep(self):
        x = gauss_seidel(from_dense([[2, 1], [1, 2]]), np.zeros(2), np.array([3.0, 3.0]), 1)
        np.testing.assert_array_equal(x, [1.5, 0.75])

    def test_input_not_modified(self):
        x0 = np.zeros(2)
        gauss_seidel(from_dense([[2, 1], [1, 2]]), x0, np.array([3.0, 3.0]), 3)
        assert not x0.any()

    def test_zero_diagonal_raises(self):
        A = from_dense([[0.0, 1.0], [1.0, 2.0]])
        with pytest.raises(ZeroDiagonal) as info:
            gauss_seidel(A, np.zeros(2), np.ones(2), 1)
        assert info.value.index == 0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 100), st.integers(0, 2**32 - 1))
    def test_energy_never_increases_on_spd(self, n, seed):
        rng = np.random.default_rng(seed)
        A = _random_spd(n, rng)
        b = rng.standard_normal(n)
        xs = np.linalg.solve(A, b)
        x = rng.standard_normal(n)

        def energy(v):
            e = v - xs
            return e @ A @ e

        S = from_dense(A)
        for _ in range(4):
            nxt = gauss_seidel(S, x, b, 1)
            assert energy(nxt) <= energy(x) * (1 + 1e-12) + 1e-12
            x = nxt


class TestCholesky:
    def test_identity(self):
        b = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(dense_cholesky_solve(sp.identity(3, format="csr"), b), b)

    def test_diagonal(self):
        np.testing.assert_allclose(dense_cholesky_solve(sp.diags([4.0, 9.0]), np.array([8.0, 27.0])), [2.0, 3.0])

    def test_graph_laplacian_plus_identity_matches_lu(self):
        rng = np.random.default_rng(11)
        n = 50
        W = sp.random(n, n, density=0.1, random_state=3, format="csr")
        W = W + W.T
        L = sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W + sp.identity(n)
        b = rng.standard_normal(n)
        x = dense_cholesky_solve(L.tocsr(), b)
        lu, piv = scipy.linalg.lu_factor(L.toarray())
        np.testing.assert_allclose(x, scipy.linalg.lu_solve((lu, piv), b), rtol=1e-9, atol=1e-12)

    def test_indefinite_raises(self):
        with pytest.raises(NotPositiveDefinite):
            CholeskySolver(from_dense([[1.0, 2.0], [2.0, 1.0]]))

    def test_singular_laplacian_raises(self):
        with pytest.raises(NotPositiveDefinite):
            CholeskySolver(from_dense([[1.0, -1.0], [-1.0, 1.0]]))

    def test_factor_reused(self):
        rng = np.random.default_rng(4)
        A = _random_spd(8, rng)
        solver = CholeskySolver(from_dense(A))
        for _ in range(3):
            b = rng.standard_normal(8)
            np.testing.assert_allclose(A @ solver.solve(b), b, atol=1e-10)


def test_finalize_canonical_form():
    A = sp.coo_matrix(([1.0, 2.0, 1e-20, 3.0], ([0, 0, 1, 1], [1, 1, 0, 1])), shape=(2, 2))
    C = finalize(A)
    assert C.format == "csr" and C.has_sorted_indices
    assert C.toarray().tolist() == [[0.0, 3.0], [0.0, 3.0]]
    assert C.nnz == 2


def test_is_symmetric():
    assert is_symmetric(from_dense([[1.0, 2.0], [2.0, 1.0]]))
    assert not is_symmetric(from_dense([[1.0, 2.0], [0.0, 1.0]]))
    assert not is_symmetric(sp.csr_matrix((2, 3)))


def test_mtx_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    A = finalize(sp.random(30, 30, density=0.15, random_state=rng) * 1e3 + sp.identity(30) / 3.0)
    write_mtx(tmp_path / "a.mtx", A)
    B = read_mtx(tmp_path / "a.mtx")
    assert B.shape == A.shape
    assert abs(A - B).max() == 0.0
