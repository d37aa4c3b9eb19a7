import numpy as np
import pytest

from spancent import Graph, compute_spectral_basis, generate_ergodic_erdos_renyi


def triangle() -> Graph:
    return Graph.from_edges([(0, 1), (1, 2), (0, 2)])


def complete4() -> Graph:
    return Graph.from_edges([(i, j) for i in range(4) for j in range(i + 1, 4)])


def path3() -> Graph:
    return Graph.from_edges([(0, 1), (1, 2)])


def two_triangles_bridge() -> Graph:
    """Two triangles joined by a single bridge edge (2, 3)."""
    return Graph.from_edges(
        [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
    )


def er(n: int, m: int, seed: int = 0) -> Graph:
    g, _ = generate_ergodic_erdos_renyi(n, m, seed)
    return g


def full_basis(g: Graph):
    return compute_spectral_basis(g, g.n)


@pytest.fixture(scope="session")
def k3():
    return triangle()


@pytest.fixture(scope="session")
def k4():
    return complete4()


@pytest.fixture(scope="session")
def bridge_graph():
    return two_triangles_bridge()


@pytest.fixture(scope="session")
def k3_basis(k3):
    return full_basis(k3)


@pytest.fixture(scope="session")
def small_er():
    return er(40, 110, seed=7)


@pytest.fixture(scope="session")
def small_er_basis(small_er):
    return full_basis(small_er)


@pytest.fixture(scope="session")
def medium_er():
    return er(300, 1500, seed=11)


@pytest.fixture(scope="session")
def medium_er_basis(medium_er):
    return compute_spectral_basis(medium_er, min(128, medium_er.n))


def seeded(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
