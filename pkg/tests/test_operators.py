import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfmg import shapes
from surfmg.mesh_io import SurfaceGraph, TriangleMesh, knn_graph
from surfmg.operators import (OperatorPair, assemble, assemble_bilaplacian, assemble_poisson, assemble_smoothing,
                              cotan_laplacian, graph_laplacian, lumped_mass, mesh_operators)

EQUILATERAL = TriangleMesh(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3) / 2, 0.0]]),
                           np.array([[0, 1, 2]]))
# hand values: cot(60 deg) / 2 and (sqrt(3) / 4) / 3
OFF = -1.0 / (2.0 * np.sqrt(3.0))
MASS = np.sqrt(3.0) / 12.0
LAP3 = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])


def test_equilateral_cotan_entries():
    S = cotan_laplacian(EQUILATERAL).toarray()
    assert OFF == pytest.approx(-0.28868, abs=5e-6)
    np.testing.assert_allclose(S, -OFF * LAP3, rtol=1e-14)


def test_right_isoceles_hypotenuse_weight_is_zero():
    mesh = TriangleMesh(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), np.array([[0, 1, 2]]))
    S = cotan_laplacian(mesh).toarray()
    assert abs(S[1, 2]) < 1e-15
    assert S[0, 1] == pytest.approx(-0.5)


def test_equilateral_lumped_mass():
    m = lumped_mass(EQUILATERAL)
    assert MASS == pytest.approx(0.14434, abs=5e-6)
    np.testing.assert_allclose(m, MASS, rtol=1e-14)


@pytest.mark.parametrize("mesh", [shapes.icosphere(2), shapes.torus(24, 8),
                                  shapes.perturbed(shapes.icosphere(2), 0.2, seed=9)])
def test_closed_mesh_operator_properties(mesh):
    S = cotan_laplacian(mesh)
    assert np.abs(S @ np.ones(mesh.n_vertices)).max() < 1e-12
    assert abs(S - S.T).max() == 0.0
    m = lumped_mass(mesh)
    p = mesh.positions
    f = mesh.faces
    area = 0.5 * np.linalg.norm(np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]]), axis=1).sum()
    assert m.sum() == pytest.approx(area, rel=1e-12)
    m2 = lumped_mass(TriangleMesh(2.0 * p, f))
    np.testing.assert_allclose(m2, 4.0 * m, rtol=1e-13)
    # positive semidefinite
    assert np.linalg.eigvalsh(S.toarray()).min() > -1e-10


def test_degenerate_face_is_counted_and_finite():
    pos = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [1, 1, 0]])
    mesh = TriangleMesh(pos, np.array([[0, 1, 2], [0, 1, 3]]))
    diag = {}
    S = cotan_laplacian(mesh, diag)
    assert diag["degenerate_faces"] == 1
    assert np.isfinite(S.data).all()


def test_unit_path_graph_laplacian():
    g = SurfaceGraph.from_edges(np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]]), [[0, 1], [1, 2]])
    ops = graph_laplacian(g)
    np.testing.assert_array_equal(ops.stiffness.toarray()[1], [-1.0, 2.0, -1.0])
    # mass: sum of incident squared lengths / 6
    np.testing.assert_allclose(ops.mass, [1 / 6, 2 / 6, 1 / 6])


def test_cloud_graph_laplacian_properties():
    g = knn_graph(shapes.sphere_cloud(200, seed=4), 6)
    ops = graph_laplacian(g)
    S = ops.stiffness
    assert np.abs(S @ np.ones(200)).max() < 1e-12
    assert (S != S.T).nnz == 0
    assert (ops.mass > 0).all()


@pytest.fixture(scope="module")
def tri_ops():
    return mesh_operators(EQUILATERAL)


def test_poisson_one_triangle_eta_one(tri_ops):
    y = np.array([1.0, 2.0, 3.0])
    A, b = assemble_poisson(tri_ops, 1.0, y)
    np.testing.assert_allclose(A.toarray(), -OFF * LAP3 + MASS * np.eye(3), rtol=1e-14)
    np.testing.assert_allclose(b, MASS * y, rtol=1e-14)


def test_poisson_zero_rhs(tri_ops):
    A, b = assemble_poisson(tri_ops, 1e-6, np.zeros(3))
    assert not b.any()


def test_poisson_requires_positive_eta(tri_ops):
    with pytest.raises(ValueError):
        assemble_poisson(tri_ops, 0.0, np.ones(3))


def test_smoothing_alpha_zero_is_mass(tri_ops):
    A, b = assemble_smoothing(tri_ops, 0.0, np.ones(3))
    np.testing.assert_allclose(A.toarray(), MASS * np.eye(3))


def test_bilaplacian_one_triangle_alpha_beta_one(tri_ops):
    # L3 @ L3 = 3 L3, so S M^-1 S = 3 c^2 / m * L3 with c = -OFF
    c = -OFF
    expected = MASS * np.eye(3) + c * LAP3 + 3.0 * c * c / MASS * LAP3
    A, _ = assemble_bilaplacian(tri_ops, 1.0, 1.0, np.ones(3))
    np.testing.assert_allclose(A.toarray(), expected, rtol=1e-13)


def test_bilaplacian_beta_zero_matches_smoothing(ico_ops):
    y = np.random.default_rng(0).standard_normal(ico_ops.n)
    A1, b1 = assemble_bilaplacian(ico_ops, 1e-3, 0.0, y)
    A2, b2 = assemble_smoothing(ico_ops, 1e-3, y)
    assert abs(A1 - A2).max() == 0.0
    np.testing.assert_array_equal(b1, b2)


@pytest.fixture(scope="module")
def ico_ops():
    return mesh_operators(shapes.perturbed(shapes.icosphere(2), 0.1, seed=3))


@pytest.mark.parametrize("kind", ["smoothing", "bilaplacian_smoothing"])
@settings(max_examples=10, deadline=None)
@given(alpha=st.floats(0.0, 1.0), beta=st.floats(0.0, 1.0), c=st.floats(-10, 10))
def test_constant_input_is_fixed_point(ico_ops, kind, alpha, beta, c):
    y = np.full(ico_ops.n, c)
    A, b = assemble(kind, ico_ops, y, alpha=alpha, beta=beta)
    x = np.linalg.solve(A.toarray(), b)
    np.testing.assert_allclose(x, y, atol=1e-9 * max(1.0, abs(c)))


@pytest.mark.parametrize("kind", ["poisson", "smoothing", "bilaplacian_smoothing"])
def test_assembled_systems_are_spd(ico_ops, kind):
    y = np.ones(ico_ops.n)
    A, _ = assemble(kind, ico_ops, y, alpha=1e-2, beta=1e-3, eta=1e-6)
    assert abs(A - A.T).max() < 1e-14 * abs(A).max()
    np.linalg.cholesky(A.toarray())


def test_assemble_rejects_wrong_length(ico_ops):
    with pytest.raises(ValueError):
        assemble("poisson", ico_ops, np.ones(ico_ops.n + 1))


def test_operator_pair_validates():
    with pytest.raises(ValueError):
        OperatorPair(cotan_laplacian(EQUILATERAL), np.ones(4))
