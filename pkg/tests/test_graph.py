import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cfsnmf.errors import ContractViolation, DomainError, EdgeListParseError
from cfsnmf.graph import (
    AdjacencyMatrix,
    build_laplacian,
    generate_sbm,
    parse_edge_list,
    parse_ground_truth,
    read_edge_list,
    read_ground_truth,
    write_edge_list,
    write_ground_truth,
)


class TestParseEdgeList:
    def test_path(self):
        adj = parse_edge_list("0 1\n1 2")
        assert adj.n == 3
        np.testing.assert_array_equal(adj.toarray(), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])

    def test_reverse_duplicate_collapses(self):
        adj = parse_edge_list("0 1\n1 0")
        assert adj.n == 2
        assert adj.n_edges == 1
        np.testing.assert_array_equal(adj.toarray(), [[0, 1], [1, 0]])

    def test_self_loop_skipped(self):
        adj = parse_edge_list("3 3")
        assert adj.n == 1
        assert adj.matrix.nnz == 0
        assert adj.self_loops_skipped == 1

    def test_comments_and_blank_lines(self):
        adj = parse_edge_list("# header\n\na b\n  # indented comment\nb c\n")
        assert adj.node_ids == ("a", "b", "c")
        assert adj.n_edges == 2

    def test_first_appearance_order(self):
        adj = parse_edge_list("z y\nx z\n")
        assert adj.node_ids == ("z", "y", "x")
        assert adj.index_of() == {"z": 0, "y": 1, "x": 2}

    def test_last_weight_wins(self):
        adj = parse_edge_list("0 1 2.5\n1 0 4\n", weighted=True)
        assert adj.toarray()[0, 1] == 4.0
        assert adj.toarray()[1, 0] == 4.0

    def test_unweighted_ignores_third_column(self):
        adj = parse_edge_list("0 1 7\n", weighted=False)
        assert adj.toarray()[0, 1] == 1.0

    def test_weighted_missing_column_defaults_to_one(self):
        adj = parse_edge_list("0 1\n1 2 0.5\n", weighted=True)
        np.testing.assert_array_equal(adj.toarray()[1], [1.0, 0.0, 0.5])

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(EdgeListParseError) as info:
            parse_edge_list("0 1\n# c\n5\n")
        assert info.value.lineno == 3
        assert "line 3" in str(info.value)

    def test_too_many_fields(self):
        with pytest.raises(EdgeListParseError):
            parse_edge_list("0 1 2 3\n")

    def test_bad_weight(self):
        with pytest.raises(EdgeListParseError) as info:
            parse_edge_list("0 1 abc\n", weighted=True)
        assert info.value.lineno == 1

    def test_negative_weight(self):
        with pytest.raises(DomainError):
            parse_edge_list("0 1 -1\n", weighted=True)

    def test_empty_input(self):
        adj = parse_edge_list("")
        assert adj.n == 0

    def test_roundtrip(self, tmp_path):
        adj = parse_edge_list("a b 2\nb c 0.5\nc a 1\n", weighted=True)
        write_edge_list(adj, tmp_path / "e.txt")
        again = read_edge_list(tmp_path / "e.txt", weighted=True)
        assert again.node_ids == adj.node_ids
        np.testing.assert_array_equal(again.toarray(), adj.toarray())

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12),
                              st.floats(0.0, 10.0, allow_nan=False)), max_size=60))
    def test_parsed_matrix_exactly_symmetric(self, edges):
        text = "\n".join(f"{i} {j} {w!r}" for i, j, w in edges)
        adj = parse_edge_list(text, weighted=True)
        dense = adj.toarray()
        assert np.max(np.abs(dense - dense.T), initial=0.0) == 0.0
        assert np.all(dense >= 0)
        assert np.all(np.diag(dense) == 0)


class TestAdjacencyMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            AdjacencyMatrix.from_dense([[0, 1], [0, 0]])

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            AdjacencyMatrix.from_dense([[0, -1], [-1, 0]])

    def test_rejects_self_loop(self):
        with pytest.raises(DomainError):
            AdjacencyMatrix.from_dense([[1, 0], [0, 0]])

    def test_rejects_non_square(self):
        with pytest.raises(ContractViolation):
            AdjacencyMatrix(sp.csr_matrix((2, 3)))

    def test_default_node_ids(self):
        adj = AdjacencyMatrix.from_dense(np.zeros((3, 3)))
        assert adj.node_ids == ("0", "1", "2")


class TestLaplacian:
    def test_path_degrees(self):
        lap = build_laplacian(parse_edge_list("0 1\n1 2"))
        np.testing.assert_array_equal(lap.degrees, [1, 2, 1])

    def test_empty_graph(self):
        adj = AdjacencyMatrix.from_dense(np.zeros((3, 3)))
        lap = build_laplacian(adj)
        np.testing.assert_array_equal(lap.degrees, [0, 0, 0])
        np.testing.assert_array_equal(lap.apply(np.eye(3)), np.zeros((3, 3)))

    def test_triangle(self):
        A = np.ones((3, 3)) - np.eye(3)
        lap = build_laplacian(AdjacencyMatrix.from_dense(A))
        np.testing.assert_array_equal(lap.degrees, [2, 2, 2])
        np.testing.assert_array_equal(lap.apply(np.eye(3)), 2 * np.eye(3) - A)

    def test_row_sums_zero_random_weighted(self, rng):
        from conftest import random_graph

        for _ in range(20):
            A = random_graph(rng, int(rng.integers(2, 40)), weighted=True)
            lap = build_laplacian(AdjacencyMatrix.from_dense(A))
            np.testing.assert_allclose(lap.degrees, A.sum(axis=1), rtol=0, atol=1e-12)
            assert np.max(np.abs(lap.apply(np.ones(A.shape[0])))) <= 1e-12

    def test_quadratic_trace_matches_both_forms(self, rng):
        from conftest import random_graph

        A = random_graph(rng, 25, weighted=True)
        X = rng.random((25, 3))
        lap = build_laplacian(AdjacencyMatrix.from_dense(A))
        dense = np.trace(X.T @ (np.diag(A.sum(1)) - A) @ X)
        pair = np.sum(A.sum(1)[:, None] * X * X) - np.sum(X * (A @ X))
        assert lap.quadratic_trace(X) == pytest.approx(dense, rel=1e-12)
        assert lap.quadratic_trace(X) == pytest.approx(pair, rel=1e-12)


class TestSBM:
    def test_deterministic_extremes(self):
        adj, truth = generate_sbm([2, 2], 1.0, 0.0, seed=3)
        np.testing.assert_array_equal(
            adj.toarray(), [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        np.testing.assert_array_equal(truth.labels, [0, 0, 1, 1])

    def test_zero_probability(self):
        adj, truth = generate_sbm([3], 0.0, 0.0, seed=1)
        assert adj.matrix.nnz == 0
        np.testing.assert_array_equal(truth.labels, [0, 0, 0])

    def test_same_seed_same_graph(self):
        a, _ = generate_sbm([20, 30], 0.3, 0.05, seed=9)
        b, _ = generate_sbm([20, 30], 0.3, 0.05, seed=9)
        assert (a.matrix != b.matrix).nnz == 0
        c, _ = generate_sbm([20, 30], 0.3, 0.05, seed=10)
        assert (a.matrix != c.matrix).nnz > 0

    def test_p_out_above_p_in_rejected(self):
        with pytest.raises(DomainError):
            generate_sbm([5, 5], 0.1, 0.2, seed=0)

    def test_nonpositive_block_rejected(self):
        with pytest.raises(DomainError):
            generate_sbm([5, 0], 0.5, 0.1, seed=0)

    def test_uniform_density_within_five_sigma(self):
        sizes, p = [15, 25, 10], 0.2
        n = sum(sizes)
        pairs = n * (n - 1) // 2
        sigma = np.sqrt(pairs * p * (1 - p))
        for seed in range(20):
            adj, _ = generate_sbm(sizes, p, p, seed)
            assert abs(adj.n_edges - pairs * p) <= 5 * sigma

    def test_output_is_valid_adjacency(self):
        adj, truth = generate_sbm([10, 10, 10], 0.5, 0.1, seed=2)
        dense = adj.toarray()
        assert np.array_equal(dense, dense.T)
        assert truth.n_communities == 3


class TestGroundTruth:
    def test_aligned_to_graph_order(self):
        adj = parse_edge_list("b a\nc a\n")
        nodes, truth = parse_ground_truth("a x\nb y\nc x\n", adj)
        assert nodes == ["b", "a", "c"]
        # community ids follow first appearance in the file: x -> 0, y -> 1
        np.testing.assert_array_equal(truth.labels, [1, 0, 0])
        assert truth.community_ids == ("x", "y")

    def test_missing_node(self):
        adj = parse_edge_list("a b\n")
        with pytest.raises(DomainError):
            parse_ground_truth("a 0\n", adj)

    def test_extra_node(self):
        adj = parse_edge_list("a b\n")
        with pytest.raises(DomainError):
            parse_ground_truth("a 0\nb 0\nc 1\n", adj)

    def test_duplicate_node(self):
        with pytest.raises(EdgeListParseError):
            parse_ground_truth("a 0\na 1\n")

    def test_roundtrip(self, tmp_path):
        adj, truth = generate_sbm([3, 4], 1.0, 0.0, seed=0)
        write_ground_truth(adj.node_ids, truth, tmp_path / "gt.txt")
        _, again = read_ground_truth(tmp_path / "gt.txt", adj)
        np.testing.assert_array_equal(again.labels, truth.labels)
