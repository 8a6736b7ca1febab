import numpy as np
import pytest
from numpy.testing import assert_allclose

from pbacc import (
    MaskSpec,
    RowPacking,
    Share,
    aggregate_rme,
    assemble_blocks,
    basis_weights,
    blocked_product,
    build_grid,
    coded_product_shares,
    decode_product,
    distributed_product,
    encode_matrix_rows,
    encode_packed,
    plan_blocks,
    sample_masks,
    worker_multiply,
)
from pbacc.errors import CapacityError, DegenerateWeightError, IncompleteAssemblyError


def rand(shape, seed):
    return np.random.default_rng(seed).normal(size=shape)


class TestEncodeMatrixRows:
    def test_single_row_share_equals_matrix(self):
        grid = build_grid(1, 0, 8)
        M = rand((1, 4), 0)
        for share in encode_matrix_rows(M, grid):
            assert_allclose(share.payload, M, atol=1e-15)

    def test_row_scaling_matches_weights(self):
        grid = build_grid(3, 0, 8)
        M = rand((3, 4), 1)
        shares = encode_matrix_rows(M, grid)
        for share in shares:
            w = basis_weights(share.z, grid.data_points)
            assert_allclose(share.payload, w[:, None] * M, atol=1e-13)

    def test_indicator_recovers_single_row(self):
        # evaluating the row encoding at a data point isolates that row
        grid = build_grid(3, 0, 8)
        M = rand((3, 4), 2)
        w = basis_weights(grid.data_points[1], grid.data_points)
        coded = w[:, None] * M
        assert np.array_equal(coded[1], M[1])
        assert np.array_equal(coded[[0, 2]], np.zeros((2, 4)))

    def test_private_hand_expansion(self):
        grid = build_grid(2, 2, 8)
        M = rand((2, 2), 3)
        spec = MaskSpec(2, 1.5, 77)
        masks = sample_masks(spec, 2)
        shares = encode_matrix_rows(M, grid, spec)
        for share in shares:
            w = basis_weights(share.z, grid.alphas)
            expected = np.stack(
                [w[i] * M[i] + w[i] * w[2 + i] * masks[i] for i in range(2)]
            )
            assert_allclose(share.payload, expected, atol=1e-13)

    def test_mask_grid_shape_enforced(self):
        grid = build_grid(2, 1, 8)
        with pytest.raises(ValueError):
            encode_matrix_rows(rand((2, 2), 0), grid, MaskSpec(2, 1.0, 0))


class TestWorkerMultiply:
    def test_single_point_exact_product(self):
        grid = build_grid(1, 0, 8)
        A, B = rand((1, 5), 0), rand((1, 5), 1)
        ca = encode_matrix_rows(A, grid)
        cb = encode_matrix_rows(B, grid)
        out = worker_multiply(ca[3], cb[3], grid)
        assert_allclose(out.payload, A @ B.T, atol=1e-13)

    def test_plain_hand_expansion(self):
        grid = build_grid(2, 0, 8)
        A, B = rand((2, 3), 2), rand((2, 3), 3)
        ca = encode_matrix_rows(A, grid)
        cb = encode_matrix_rows(B, grid)
        share = worker_multiply(ca[1], cb[1], grid)
        w = basis_weights(grid.zs[1], grid.data_points)
        expected = np.array(
            [[sum(w[i] * (A[i] @ B[j]) for i in range(2)) for j in range(2)]]
        )
        assert_allclose(share.payload, expected, atol=1e-12)

    def test_compression_identity(self):
        grid = build_grid(5, 0, 16)
        A, B = rand((5, 7), 4), rand((5, 7), 5)
        ca = encode_matrix_rows(A, grid)
        cb = encode_matrix_rows(B, grid)
        for j in (0, 7, 15):
            share = worker_multiply(ca[j], cb[j], grid)
            w = basis_weights(grid.zs[j], grid.data_points)
            direct = sum(w[i] * (A[i : i + 1] @ B.T) for i in range(5))
            assert np.abs(share.payload - direct).max() < 1e-10

    def test_synthetic_indicator_weights_recover_product_row(self):
        # feeding an indicator weight vector through the compressed form
        # yields exactly one row of A @ B.T
        A, B = rand((4, 6), 6), rand((4, 6), 7)
        for i in range(4):
            w = np.zeros(4)
            w[i] = 1.0
            row = sum(w[k] * (A[k : k + 1] @ B.T) for k in range(4))
            assert_allclose(row, (A @ B.T)[i : i + 1], atol=1e-14)

    def test_degenerate_weight_guard(self):
        grid = build_grid(2, 0, 8)
        bad = Share(0, float(grid.data_points[0]), np.ones((2, 3)))
        with pytest.raises(DegenerateWeightError):
            worker_multiply(bad, bad, grid)

    def test_mismatched_points_rejected(self):
        grid = build_grid(2, 0, 8)
        ca = encode_matrix_rows(rand((2, 3), 0), grid)
        with pytest.raises(ValueError):
            worker_multiply(ca[0], ca[1], grid)


class TestEngineEquivalence:
    @pytest.mark.parametrize("K,r,private", [(6, 1, False), (6, 1, True), (8, 2, False), (8, 2, True)])
    def test_batched_matches_per_node(self, K, r, private):
        points = K // r
        grid = build_grid(points, points if private else 0, 24)
        A, B = rand((K, 5), 10), rand((K, 5), 11)
        mask_a = MaskSpec(K, 2.0, 20) if private else None
        mask_b = MaskSpec(K, 2.0, 21) if private else None
        packing = RowPacking(r)
        engine = coded_product_shares(A, B, grid, packing, mask_a, mask_b)
        ca = encode_packed(A, grid, packing, mask_a)
        cb = encode_packed(B, grid, packing, mask_b)
        for j in range(grid.N):
            literal = worker_multiply(ca[j], cb[j], grid, packing)
            assert np.abs(literal.payload - engine[j].payload).max() < 1e-10

    def test_unpacked_and_r1_bitwise_identical(self):
        grid = build_grid(6, 6, 24)
        A, B = rand((6, 4), 12), rand((6, 4), 13)
        mask_a, mask_b = MaskSpec(6, 1.0, 30), MaskSpec(6, 1.0, 31)
        via_packing = coded_product_shares(A, B, grid, RowPacking(1), mask_a, mask_b)
        default = coded_product_shares(A, B, grid, mask_a=mask_a, mask_b=mask_b)
        for a, b in zip(via_packing, default):
            assert np.array_equal(a.payload, b.payload)


class TestDecodeProduct:
    def test_single_point_any_subset_exact(self):
        grid = build_grid(1, 0, 8)
        A, B = rand((1, 5), 0), rand((1, 5), 1)
        shares = coded_product_shares(A, B, grid, node_indices=[2, 5])
        assert_allclose(decode_product(shares, grid), A @ B.T, atol=1e-12)

    def test_desk_scale_accuracy(self):
        grid = build_grid(8, 0, 64)
        A, B = rand((8, 6), 2), rand((8, 6), 3)
        approx = distributed_product(A, B, grid)
        exact = A @ B.T  # dense-product oracle
        assert aggregate_rme(approx, exact) < 1e-2

    def test_private_pipeline_converges(self):
        grid = build_grid(8, 8, 64)
        A, B = rand((8, 6), 4), rand((8, 6), 5)
        approx = distributed_product(
            A, B, grid, mask_a=MaskSpec(8, 0.5, 40), mask_b=MaskSpec(8, 0.5, 41)
        )
        assert aggregate_rme(approx, A @ B.T) < 1e-2


class TestPacking:
    def test_rows_per_point_must_divide(self):
        with pytest.raises(ValueError):
            RowPacking(3).point_count(8)

    def test_whole_matrix_at_single_point(self):
        grid = build_grid(1, 0, 8)
        M = rand((4, 3), 6)
        for share in encode_packed(M, grid, RowPacking(4)):
            assert_allclose(share.payload, M, atol=1e-15)

    def test_reference_scale_packing(self):
        grid = build_grid(20, 0, 200)
        assert RowPacking(50).point_count(1000) == grid.K


class TestBlocks:
    def test_plan_single_block(self):
        A = rand((4, 6), 0)
        plan = plan_blocks(A, A, 1, 10)
        assert plan.cols_per_block == 6
        assert set(plan.groups) == {(0, 0)}

    def test_plan_covers_all_pairs(self):
        A = rand((4, 8), 1)
        plan = plan_blocks(A, A, 2, 16)
        groups = plan.groups
        assert set(groups) == {(x, y) for x in range(2) for y in range(2)}
        all_nodes = sorted(n for nodes in groups.values() for n in nodes)
        assert all_nodes == list(range(16))

    def test_cols_per_block(self):
        A = rand((4, 4), 2)
        assert plan_blocks(A, A, 2, 4).cols_per_block == 2

    def test_capacity_error(self):
        A = rand((4, 4), 3)
        with pytest.raises(CapacityError):
            plan_blocks(A, A, 2, 3)

    def test_assemble_passthrough(self):
        A = rand((3, 4), 4)
        plan = plan_blocks(A, A, 1, 4)
        block = rand((4, 4), 5)
        assert np.array_equal(assemble_blocks({(0, 0): block}, plan), block)

    def test_assemble_exact_blocks_bitwise(self):
        A, B = rand((5, 4), 6), rand((5, 4), 7)
        plan = plan_blocks(A, B, 2, 4)
        h = plan.cols_per_block
        decoded = {
            (x, y): A[:, x * h : (x + 1) * h].T @ B[:, y * h : (y + 1) * h]
            for x in range(2)
            for y in range(2)
        }
        assert np.array_equal(assemble_blocks(decoded, plan), A.T @ B)

    def test_missing_block_reported(self):
        A = rand((3, 4), 8)
        plan = plan_blocks(A, A, 2, 4)
        with pytest.raises(IncompleteAssemblyError) as info:
            assemble_blocks({(0, 0): np.zeros((2, 2))}, plan)
        assert (0, 1) in info.value.missing

    def test_blocked_pipeline_desk_scale(self):
        A, B = rand((8, 6), 9), rand((8, 6), 10)
        plan = plan_blocks(A, B, 2, 64)
        grid = build_grid(3, 0, 64)
        approx = blocked_product(A, B, plan, grid)
        assert aggregate_rme(approx, A.T @ B) < 1e-2

    def test_blocked_and_direct_agree_on_threshold(self):
        # different encodings, common accuracy bar
        A, B = rand((8, 6), 11), rand((8, 6), 12)
        direct = distributed_product(A.T, B.T, build_grid(6, 0, 64))
        plan = plan_blocks(A, B, 2, 64)
        blocked = blocked_product(A, B, plan, build_grid(3, 0, 64))
        exact = A.T @ B
        assert aggregate_rme(direct, exact) < 1e-2
        assert aggregate_rme(blocked, exact) < 1e-2

    def test_group_restricted_mode(self):
        A, B = rand((8, 6), 13), rand((8, 6), 14)
        plan = plan_blocks(A, B, 2, 64)
        grid = build_grid(3, 0, 64)
        approx = blocked_product(A, B, plan, grid, restrict_to_groups=True)
        assert aggregate_rme(approx, A.T @ B) < 5e-2

    def test_single_block_matches_direct_pipeline_bitwise(self):
        from dataclasses import replace

        from pbacc.seeding import MATRIX_STREAM, derive_seed

        A, B = rand((6, 4), 15), rand((6, 4), 16)
        plan = plan_blocks(A, B, 1, 32)
        grid = build_grid(4, 4, 32)
        mask_a, mask_b = MaskSpec(4, 1.0, 50), MaskSpec(4, 1.0, 51)
        blocked = blocked_product(A, B, plan, grid, mask_a=mask_a, mask_b=mask_b)
        direct = distributed_product(
            A.T,
            B.T,
            grid,
            mask_a=replace(mask_a, seed=derive_seed(50, MATRIX_STREAM, 0, 0)),
            mask_b=replace(mask_b, seed=derive_seed(51, MATRIX_STREAM, 1, 0)),
        )
        assert np.array_equal(blocked, direct)
