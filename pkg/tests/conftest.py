import numpy as np
import pytest

from surfmg import shapes
from surfmg.mesh_io import TriangleMesh, knn_graph, mesh_to_graph

from oracles import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _ellipsoid():
    m = shapes.icosphere(4)
    return TriangleMesh(m.positions * np.array([1.5, 1.0, 0.6]), m.faces)


def _bumpy_sphere():
    m = shapes.icosphere(4)
    p = m.positions
    r = 1.0 + 0.15 * np.sin(4 * p[:, 0]) * np.cos(3 * p[:, 1])
    return TriangleMesh(p * r[:, None], m.faces)


def build_mesh_corpus():
    return {
        "ico2": shapes.icosphere(2),
        "ico3": shapes.icosphere(3),
        "ico4": shapes.icosphere(4),
        "ico5": shapes.icosphere(5),
        "torus": shapes.torus(),
        "torus_fine": shapes.torus(96, 32, 1.0, 0.4),
        "ellipsoid": _ellipsoid(),
        "bumpy_sphere": _bumpy_sphere(),
        "noisy_ico3": shapes.perturbed(shapes.icosphere(3), 0.1, seed=1),
        "noisy_ico4": shapes.perturbed(shapes.icosphere(4), 0.15, seed=2),
        "noisy_torus": shapes.perturbed(shapes.torus(64, 24), 0.1, seed=3),
    }


def build_cloud_corpus():
    return {
        "sphere_cloud": shapes.sphere_cloud(2000, seed=1),
        "torus_cloud": shapes.torus_cloud(3000, seed=2),
        "grid_cloud": shapes.grid_cloud(45, 45, seed=3),
    }


@pytest.fixture(scope="session")
def mesh_corpus():
    return build_mesh_corpus()


@pytest.fixture(scope="session")
def cloud_corpus():
    return build_cloud_corpus()


@pytest.fixture(scope="session")
def corpus_graphs(mesh_corpus, cloud_corpus):
    graphs = {name: mesh_to_graph(m) for name, m in mesh_corpus.items()}
    graphs.update({name: knn_graph(c, 8) for name, c in cloud_corpus.items()})
    return graphs


@pytest.fixture(scope="session")
def ico4():
    return shapes.icosphere(4)

