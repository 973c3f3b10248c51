import numpy as np
import pytest

from aggrank import (
    Partition,
    build_aggregated_system,
    decompose_link_matrix,
    lift_from_group_coords,
    link_matrix,
    load_groups,
    node_parameters,
    project_to_group_coords,
    refine_partition,
    repair_dangling,
    save_groups,
    verify_assumption,
)
from aggrank.aggregation import BlockTransforms
from conftest import (
    SIXPAGE_A11,
    SIXPAGE_A21,
    SIXPAGE_A22P,
    SIXPAGE_A_EXT,
    SIXPAGE_A_INT,
    SIXPAGE_NODE_PARAMS,
    SIXPAGE_X_STAR,
    SIXPAGE_XTILDE_STAR,
)
from helpers import dense_transform_matrices, one_norm, random_partition, random_web


class TestPartition:
    def test_basic_properties(self, sixpage_partition):
        p = sixpage_partition
        assert p.r == 3
        assert list(p.sizes) == [2, 1, 3]
        assert p.singles_count == 1
        assert list(p.page_to_group) == [0, 0, 1, 2, 2, 2]

    def test_from_labels_roundtrip(self, sixpage_partition):
        p = Partition.from_labels(sixpage_partition.page_to_group)
        assert p == sixpage_partition

    def test_rejects_overlap(self):
        with pytest.raises(ValueError, match="overlap"):
            Partition.from_groups([[0, 1], [1, 2]], 3)

    def test_rejects_gap(self):
        with pytest.raises(ValueError, match="not assigned"):
            Partition.from_groups([[0], [2]], 3)

    def test_rejects_empty_group(self):
        with pytest.raises(ValueError, match="empty"):
            Partition(((0, 1), ()), 2)

    def test_from_block_sizes(self):
        p = Partition.from_block_sizes([2, 3])
        assert p.groups == ((0, 1), (2, 3, 4))


class TestNodeParameters:
    def test_sixpage_values(self, sixpage_graph, sixpage_partition):
        params = node_parameters(sixpage_graph, sixpage_partition)
        assert np.allclose(params, SIXPAGE_NODE_PARAMS)

    def test_all_in_one_partition_is_zero(self, sixpage_graph):
        params = node_parameters(sixpage_graph, Partition.all_in_one(6))
        assert np.all(params == 0.0)

    def test_two_group_split(self, sixpage_graph):
        p = Partition.from_groups([[0, 1, 2], [3, 4, 5]], 6)
        params = node_parameters(sixpage_graph, p)
        assert np.allclose(params, [1 / 2, 0, 2 / 3, 1 / 3, 0, 0])

    def test_multi_target_mode_skips_single_group_targets(
        self, sixpage_graph, sixpage_partition
    ):
        params = node_parameters(sixpage_graph, sixpage_partition, mode="multi-target")
        # pages 1 and 3 link across only to the single group {2}
        assert np.allclose(params, [0.5, 0.0, 1.0, 0.0, 0.0, 0.0])

    def test_unknown_mode(self, sixpage_graph, sixpage_partition):
        with pytest.raises(ValueError, match="mode"):
            node_parameters(sixpage_graph, sixpage_partition, mode="both")

    def test_requires_repaired_graph(self):
        from aggrank import parse_edge_list

        g = parse_edge_list("n 2\n0 1")
        with pytest.raises(ValueError, match="dangling"):
            node_parameters(g, Partition.singles(2))


class TestVerifyAssumption:
    def test_sixpage_passes_at_half(self, sixpage_graph, sixpage_partition):
        assert verify_assumption(sixpage_graph, sixpage_partition, 0.5).ok

    def test_violators_at_tighter_bound(self, sixpage_graph, sixpage_partition):
        report = verify_assumption(sixpage_graph, sixpage_partition, 0.3)
        assert not report.ok
        # page 2 has parameter 1 but sits in a single group, hence exempt
        assert report.violators == [0, 1, 3]

    def test_all_singles_always_ok(self, sixpage_graph):
        report = verify_assumption(sixpage_graph, Partition.singles(6), 0.01)
        assert report.ok


class TestRefinePartition:
    def test_sixpage_unchanged_at_half(self, sixpage_graph, sixpage_partition):
        refined = refine_partition(sixpage_graph, sixpage_partition, 0.5)
        assert refined == sixpage_partition

    def test_all_in_one_unchanged(self, sixpage_graph):
        initial = Partition.all_in_one(6)
        assert refine_partition(sixpage_graph, initial, 0.1) == initial

    def test_cascading_ejections(self, sixpage_graph):
        initial = Partition.from_groups([[0, 1, 2], [3, 4, 5]], 6)
        refined = refine_partition(sixpage_graph, initial, 0.4)
        assert refined.r == 4
        assert refined.groups == ((1,), (3, 4, 5), (0,), (2,))

    def test_result_always_passes(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(4, 30))
            g = repair_dangling(random_web(rng, n))
            initial = random_partition(rng, n)
            delta = float(rng.uniform(0.05, 0.8))
            refined = refine_partition(g, initial, delta)
            assert verify_assumption(g, refined, delta).ok

    def test_delta_range(self, sixpage_graph, sixpage_partition):
        with pytest.raises(ValueError):
            refine_partition(sixpage_graph, sixpage_partition, 0.0)


class TestBlockTransforms:
    def test_sixpage_projection(self, sixpage_matrix, sixpage_partition):
        from aggrank import power_method

        x_star = power_method(sixpage_matrix).values
        t = BlockTransforms(sixpage_partition)
        x1, x2 = project_to_group_coords(x_star, t)
        assert np.abs(np.concatenate([x1, x2]) - SIXPAGE_XTILDE_STAR).max() < 5e-4

    def test_project_lift_roundtrip(self, sixpage_partition):
        t = BlockTransforms(sixpage_partition)
        x = SIXPAGE_X_STAR
        x1, x2 = project_to_group_coords(x, t)
        assert np.abs(lift_from_group_coords(x1, x2, t) - x).max() < 1e-12

    def test_constant_vector_single_group(self):
        t = BlockTransforms(Partition.all_in_one(5))
        x1, x2 = project_to_group_coords(np.full(5, 0.3), t)
        assert np.allclose(x1, [1.5])
        assert np.allclose(x2, 0.0)

    def test_basis_vector_all_singles(self):
        t = BlockTransforms(Partition.singles(4))
        e0 = np.array([1.0, 0, 0, 0])
        x1, x2 = project_to_group_coords(e0, t)
        assert np.allclose(x1, e0)
        assert x2.size == 0

    def test_zero_deviations_lift_to_group_means(self, sixpage_partition):
        t = BlockTransforms(sixpage_partition)
        x1 = np.array([0.4, 0.2, 0.4])
        lifted = lift_from_group_coords(x1, np.zeros(3), t)
        assert np.allclose(lifted, [0.2, 0.2, 0.2, 0.4 / 3, 0.4 / 3, 0.4 / 3])

    def test_dimension_mismatch(self, sixpage_partition):
        t = BlockTransforms(sixpage_partition)
        with pytest.raises(ValueError):
            t.apply_w1(np.zeros(4))
        with pytest.raises(ValueError):
            t.apply_w2(np.zeros(2))

    def test_operators_match_dense_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            n = int(rng.integers(2, 13))
            p = random_partition(rng, n)
            t = BlockTransforms(p)
            V, W = dense_transform_matrices(p)
            r = p.r
            # apply operators to the identity to materialize them
            v1_op = np.column_stack([t.apply_v1(col) for col in np.eye(n)])
            w1_op = np.column_stack([t.apply_w1(col) for col in np.eye(r)])
            assert np.abs(v1_op - V[:r]).max() < 1e-12
            assert np.abs(w1_op - W[:, :r]).max() < 1e-12
            if n > r:
                v2_op = np.column_stack([t.apply_v2(col) for col in np.eye(n)])
                w2_op = np.column_stack([t.apply_w2(col) for col in np.eye(n - r)])
                assert np.abs(v2_op - V[r:]).max() < 1e-12
                assert np.abs(w2_op - W[:, r:]).max() < 1e-12

    def test_identity_compositions_on_random_vectors(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            n = int(rng.integers(2, 40))
            t = BlockTransforms(random_partition(rng, n))
            x = rng.normal(size=n)
            x1, x2 = t.apply_v1(x), t.apply_v2(x)
            # V W = I blockwise
            assert np.abs(t.apply_v1(t.apply_w1(x1)) - x1).max() < 1e-12
            assert np.abs(t.apply_v2(t.apply_w1(x1))).max() < 1e-12
            if x2.size:
                assert np.abs(t.apply_v1(t.apply_w2(x2))).max() < 1e-12
                assert np.abs(t.apply_v2(t.apply_w2(x2)) - x2).max() < 1e-12
            # W V = I
            recon = t.apply_w1(x1) + t.apply_w2(x2)
            assert np.abs(recon - x).max() < 1e-12


class TestDecomposition:
    def test_sixpage_matrices(self, sixpage_matrix, sixpage_partition):
        dec = decompose_link_matrix(sixpage_matrix, sixpage_partition)
        assert np.abs(dec.a_int.toarray() - SIXPAGE_A_INT).max() < 1e-14
        assert np.abs(dec.a_ext.toarray() - SIXPAGE_A_EXT).max() < 1e-14

    def test_sixpage_ext0_zeroes_single_group_column(
        self, sixpage_matrix, sixpage_partition
    ):
        dec = decompose_link_matrix(sixpage_matrix, sixpage_partition)
        ext0 = dec.a_ext0.toarray()
        assert np.all(ext0[:, 2] == 0.0)
        keep = [0, 1, 3, 4, 5]
        assert np.abs(ext0[:, keep] - SIXPAGE_A_EXT[:, keep]).max() < 1e-14

    def test_all_in_one(self, sixpage_matrix):
        dec = decompose_link_matrix(sixpage_matrix, Partition.all_in_one(6))
        assert dec.a_ext.nnz == 0
        assert np.abs(
            dec.a_int.toarray() - (sixpage_matrix.toarray() - np.eye(6))
        ).max() < 1e-14

    def test_all_singles(self, sixpage_matrix):
        dec = decompose_link_matrix(sixpage_matrix, Partition.singles(6))
        assert dec.a_int.nnz == 0
        assert dec.a_ext0.nnz == 0
        assert np.abs(
            dec.a_ext.toarray() - (sixpage_matrix.toarray() - np.eye(6))
        ).max() < 1e-14

    def test_exact_sum_and_zero_columns_random(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            n = int(rng.integers(2, 40))
            g = repair_dangling(random_web(rng, n))
            A = link_matrix(g)
            p = random_partition(rng, n)
            dec = decompose_link_matrix(A, p)
            total = np.eye(n) + dec.a_int.toarray() + dec.a_ext.toarray()
            assert np.abs(total - A.toarray()).max() < 1e-14
            assert np.abs(dec.a_int.sum(axis=0)).max() < 1e-14
            assert np.abs(dec.a_ext.sum(axis=0)).max() < 1e-14
            # I + a_int is column stochastic
            stoch = np.eye(n) + dec.a_int.toarray()
            assert stoch.min() >= -1e-15
            assert np.abs(stoch.sum(axis=0) - 1.0).max() < 1e-12

    def test_v1_annihilates_internal_part(self):
        rng = np.random.default_rng(37)
        for _ in range(10):
            n = int(rng.integers(2, 30))
            g = repair_dangling(random_web(rng, n))
            p = random_partition(rng, n)
            dec = decompose_link_matrix(link_matrix(g), p)
            t = BlockTransforms(p)
            for _ in range(5):
                x = rng.normal(size=n)
                assert np.abs(t.apply_v1(dec.a_int @ x)).max() < 1e-12

    def test_ext_and_ext0_agree_through_w2(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            n = int(rng.integers(2, 30))
            g = repair_dangling(random_web(rng, n))
            p = random_partition(rng, n)
            dec = decompose_link_matrix(link_matrix(g), p)
            t = BlockTransforms(p)
            for _ in range(5):
                y = rng.normal(size=t.deviation_dim)
                lifted = t.apply_w2(y)
                assert np.abs(dec.a_ext @ lifted - dec.a_ext0 @ lifted).max() < 1e-12

    def test_ext0_one_norm_bounded_by_twice_delta(self):
        rng = np.random.default_rng(43)
        for _ in range(20):
            n = int(rng.integers(4, 40))
            g = repair_dangling(random_web(rng, n))
            delta = float(rng.uniform(0.05, 0.7))
            p = refine_partition(g, random_partition(rng, n), delta)
            dec = decompose_link_matrix(link_matrix(g), p)
            assert one_norm(dec.a_ext0.toarray()) <= 2 * delta + 1e-12


class TestAggregatedSystem:
    def test_sixpage_a11(self, sixpage_matrix, sixpage_partition):
        sys_ = build_aggregated_system(sixpage_matrix, sixpage_partition)
        assert np.abs(sys_.a11.toarray() - SIXPAGE_A11).max() < 5e-4
        assert list(sys_.u) == [2, 1, 3]

    def test_sixpage_a21_and_blocks(self, sixpage_matrix, sixpage_partition):
        sys_ = build_aggregated_system(sixpage_matrix, sixpage_partition)
        assert np.abs(sys_.a21.toarray() - SIXPAGE_A21).max() < 5e-4
        assert np.abs(sys_.a22p_dense() - SIXPAGE_A22P).max() < 5e-4
        assert [b.shape for b in sys_.a22p_blocks] == [(1, 1), (2, 2)]

    def test_all_singles_degenerates_to_original(self, sixpage_matrix):
        sys_ = build_aggregated_system(sixpage_matrix, Partition.singles(6))
        assert np.abs(sys_.a11.toarray() - sixpage_matrix.toarray()).max() < 1e-14
        assert sys_.a21.shape == (0, 6)
        assert sys_.a22p_blocks == ()

    def test_a11_column_stochastic_random(self):
        rng = np.random.default_rng(47)
        for _ in range(20):
            n = int(rng.integers(2, 40))
            g = repair_dangling(random_web(rng, n))
            p = random_partition(rng, n)
            sys_ = build_aggregated_system(link_matrix(g), p)
            a11 = sys_.a11.toarray()
            assert a11.min() >= -1e-15
            assert np.abs(a11.sum(axis=0) - 1.0).max() < 1e-12

    def test_a22p_spectral_radius_at_most_one(self):
        rng = np.random.default_rng(53)
        for _ in range(20):
            n = int(rng.integers(2, 40))
            g = repair_dangling(random_web(rng, n))
            p = random_partition(rng, n)
            sys_ = build_aggregated_system(link_matrix(g), p)
            assert sys_.spectral_radius_a22p() <= 1.0 + 1e-9

    def test_blocks_match_dense_oracle(self):
        # full transformed matrix V A W assembled densely; its diagonal
        # deviation blocks restricted to the internal part must equal a22p
        rng = np.random.default_rng(59)
        for _ in range(15):
            n = int(rng.integers(2, 12))
            g = repair_dangling(random_web(rng, n))
            A = link_matrix(g)
            p = random_partition(rng, n)
            V, W = dense_transform_matrices(p)
            dec = decompose_link_matrix(A, p)
            r = p.r
            want_a11 = (V @ A.toarray() @ W)[:r, :r]
            want_a21 = (V @ A.toarray() @ W)[r:, :r]
            want_a22p = np.eye(n - r) + (V @ dec.a_int.toarray() @ W)[r:, r:]
            sys_ = build_aggregated_system(A, p)
            assert np.abs(sys_.a11.toarray() - want_a11).max() < 1e-12
            assert np.abs(sys_.a21.toarray() - want_a21).max() < 1e-12
            assert np.abs(sys_.a22p_dense() - want_a22p).max() < 1e-12


class TestGroupFiles:
    def test_roundtrip(self, tmp_path, sixpage_partition):
        path = tmp_path / "groups.tsv"
        save_groups(sixpage_partition, path)
        assert load_groups(path, 6) == sixpage_partition

    def test_missing_page(self, tmp_path):
        path = tmp_path / "groups.tsv"
        path.write_text("0 0\n2 1\n")
        with pytest.raises(ValueError, match="no group"):
            load_groups(path, 3)

    def test_duplicate_page(self, tmp_path):
        path = tmp_path / "groups.tsv"
        path.write_text("0 0\n0 1\n")
        with pytest.raises(ValueError, match="twice"):
            load_groups(path)
