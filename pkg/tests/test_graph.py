import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from distls.errors import InvalidArgument, PreconditionViolation
from distls.graph import (
    DirectedGraph,
    diameter,
    format_graph,
    incidence_apply,
    incidence_transpose_apply,
    n_hop_neighborhood,
    parse_graph_lines,
    random_connected_graph,
    read_graph,
    write_graph,
)


@st.composite
def graphs(draw, n_max=15):
    n = draw(st.integers(2, n_max))
    E = draw(st.integers(n - 1, n * (n - 1) // 2))
    return random_connected_graph(n, E, draw(st.integers(0, 2**31 - 1)))


def test_incidence_apply_examples(triangle):
    single = DirectedGraph(2, ((0, 1),))
    np.testing.assert_array_equal(incidence_apply(single, [1.0]), [1.0, -1.0])
    np.testing.assert_array_equal(incidence_apply(triangle, np.zeros(3)), np.zeros(3))
    np.testing.assert_array_equal(incidence_apply(triangle, np.ones(3)), [2.0, 0.0, -2.0])


def test_incidence_transpose_examples(triangle):
    single = DirectedGraph(2, ((0, 1),))
    np.testing.assert_array_equal(incidence_transpose_apply(single, [3.0, 1.0]), [2.0])
    np.testing.assert_array_equal(incidence_transpose_apply(triangle, np.full(3, 4.2)), np.zeros(3))
    np.testing.assert_array_equal(incidence_transpose_apply(triangle, [1.0, 0.0, -1.0]), [1.0, 1.0, 2.0])


def test_incidence_matches_sparse_matrix(triangle):
    A = triangle.incidence.toarray()
    np.testing.assert_array_equal(A, [[1, 0, 1], [-1, 1, 0], [0, -1, -1]])


def test_dimension_mismatch(triangle):
    with pytest.raises(InvalidArgument):
        incidence_apply(triangle, np.ones(2))
    with pytest.raises(InvalidArgument):
        incidence_transpose_apply(triangle, np.ones(4))


def test_neighborhood_examples(triangle, path4):
    assert n_hop_neighborhood(triangle, 0, 0).members == {0}
    assert n_hop_neighborhood(triangle, 0, 1).members == {0, 1, 2}
    assert n_hop_neighborhood(path4, 0, 2).members == {0, 1, 2}
    assert 2 in n_hop_neighborhood(path4, 0, 2) and len(n_hop_neighborhood(path4, 3, 1)) == 2
    with pytest.raises(InvalidArgument):
        n_hop_neighborhood(path4, 4, 1)
    with pytest.raises(InvalidArgument):
        n_hop_neighborhood(path4, 0, -1)


def test_diameter_examples(triangle, path4):
    assert diameter(DirectedGraph(2, ((0, 1),))) == 1
    assert diameter(triangle) == 1
    assert diameter(path4) == 3
    loose = DirectedGraph(4, ((0, 1), (2, 3)), check_connected=False)
    with pytest.raises(PreconditionViolation):
        diameter(loose)


@pytest.mark.parametrize("edges, exc", [
    (((0, 0), (0, 1)), InvalidArgument),
    (((0, 1), (1, 0)), InvalidArgument),
    (((0, 1), (0, 1)), InvalidArgument),
    (((0, 3),), InvalidArgument),
    (((0, 1),), PreconditionViolation),
])
def test_construction_rejects(edges, exc):
    with pytest.raises(exc):
        DirectedGraph(3, edges)


def test_random_graph_forced_and_deterministic():
    g = random_connected_graph(2, 1, seed=123)
    assert {tuple(sorted(e)) for e in g.edges} == {(0, 1)}
    assert random_connected_graph(25, 100, 9).edges == random_connected_graph(25, 100, 9).edges
    assert random_connected_graph(25, 100, 9).edges != random_connected_graph(25, 100, 10).edges


def test_random_graph_benchmark_sizes():
    for seed in range(50):
        g = random_connected_graph(25, 100, seed)
        assert g.E == 100 and g.is_connected()


@pytest.mark.parametrize("n, E", [(1, 0), (5, 3), (5, 11)])
def test_random_graph_infeasible(n, E):
    with pytest.raises(InvalidArgument):
        random_connected_graph(n, E, 0)


@given(graphs(), st.integers(0, 2**31 - 1))
def test_column_sums_vanish_and_adjoint(g, seed):
    rng = np.random.default_rng(seed)
    x, lam = rng.standard_normal(g.E), rng.standard_normal(g.n)
    Ax = incidence_apply(g, x)
    assert abs(Ax.sum()) <= 1e-12 * max(1.0, np.abs(x).sum())
    lhs, rhs = lam @ Ax, incidence_transpose_apply(g, lam) @ x
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@given(graphs())
def test_full_radius_neighborhood_is_everything(g):
    D = diameter(g)
    for c in range(g.n):
        assert n_hop_neighborhood(g, c, D).members == set(range(g.n))


@given(graphs(), st.integers(0, 6))
def test_neighborhood_size_counting(g, radius):
    # a connected graph has a node at every distance up to the eccentricity
    for c in range(g.n):
        assert len(n_hop_neighborhood(g, c, radius).members) >= min(g.n, radius + 1)


@given(graphs(), st.integers(0, 4))
def test_neighborhood_matches_hop_distances(g, radius):
    mask = g.neighborhood_mask(radius).toarray().astype(bool)
    for c in range(g.n):
        hood = n_hop_neighborhood(g, c, radius)
        assert c in hood
        assert hood.members == set(np.flatnonzero(mask[c]).tolist())


def test_graph_text_round_trip(tmp_path):
    g = random_connected_graph(12, 20, 4)
    write_graph(g, tmp_path / "g.txt")
    assert read_graph(tmp_path / "g.txt").edges == g.edges
    assert format_graph(g).splitlines()[0] == "12 20"


@pytest.mark.parametrize("text", ["", "3\n", "3 2\n0 1\n", "3 2\n0 1\n1 x\n", "2 1\n0 1 2\n"])
def test_graph_text_malformed(text):
    with pytest.raises(InvalidArgument):
        parse_graph_lines(text.splitlines())
