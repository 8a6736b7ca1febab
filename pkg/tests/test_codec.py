import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from pbacc import (
    MaskSpec,
    Share,
    basis_weights,
    berrut_evaluate,
    build_grid,
    chebyshev_first_kind,
    decode,
    encode_plain,
    encode_private,
    rme,
    sample_masks,
    share_from_json,
    share_to_json,
    weight_matrix,
)
from pbacc.errors import InsufficientResultsError


class TestBasisWeights:
    def test_indicator_at_point(self):
        pts = chebyshev_first_kind(5)
        w = basis_weights(pts[2], pts)
        assert w.tolist() == [0.0, 0.0, 1.0, 0.0, 0.0]

    def test_symmetric_pair_splits_evenly(self):
        w = basis_weights(0.0, chebyshev_first_kind(2))
        assert_allclose(w, [0.5, 0.5], rtol=1e-15)

    def test_frozen_quotient_values(self):
        # expected values computed with a direct term-by-term evaluation of
        # the reciprocal-distance quotient (see oracle below)
        w = basis_weights(0.5, chebyshev_first_kind(4))
        expected = [
            0.2257029432972798,
            0.8154931568489173,
            -0.10838637566236958,
            0.06719027551617261,
        ]
        assert_allclose(w, expected, rtol=1e-13)
        assert abs(w.sum() - 1.0) < 1e-12

    def test_matches_direct_quotient_oracle(self):
        pts = chebyshev_first_kind(4)
        for z in (0.5, -0.31, 0.99, 2.7):
            terms = [(-1) ** i / (z - p) for i, p in enumerate(pts)]
            oracle = np.array(terms) / sum(terms)
            assert_allclose(basis_weights(z, pts), oracle, rtol=1e-12)

    @given(st.floats(-3.0, 3.0), st.integers(1, 60), st.integers(0, 30))
    @settings(max_examples=200)
    def test_partition_of_unity(self, z, K, T):
        points = np.concatenate([chebyshev_first_kind(K), 10.0 + chebyshev_first_kind(T) if T else np.empty(0)])
        w = basis_weights(z, points)
        assert abs(w.sum() - 1.0) < 1e-12


class TestMasks:
    def test_deterministic(self):
        spec = MaskSpec(3, 2.0, 99)
        assert np.array_equal(sample_masks(spec, 4), sample_masks(spec, 4))

    def test_variance_scaling(self):
        draws = sample_masks(MaskSpec(1, 1.0, 2024), 1_000_000)
        assert 0.99 < draws.var() < 1.01
        draws = sample_masks(MaskSpec(4, 2.0, 7), 250_000)
        assert 0.98 < draws.var() < 1.02  # sigma_n^2 / T = 4 / 4

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            MaskSpec(2, 0.0, 1)
        with pytest.raises(ValueError):
            sample_masks(MaskSpec(0, 1.0, 1), 3)


class TestEncodePlain:
    def test_single_row_every_share_equals_it(self):
        grid = build_grid(1, 0, 8)
        X = np.array([[3.0, -1.0, 2.5]])
        for share in encode_plain(X, grid):
            assert np.array_equal(share.payload, X)

    def test_symmetry_cancels_at_zero(self):
        grid = build_grid(2, 0, 3)  # zs contain an exact 0
        shares = encode_plain(np.array([[1.0], [-1.0]]), grid)
        assert shares[1].z == 0.0
        assert abs(shares[1].payload[0, 0]) < 1e-15

    def test_recovery_at_data_points(self):
        grid = build_grid(4, 0, 16)
        X = np.random.default_rng(0).normal(size=(4, 3))
        for i, alpha in enumerate(grid.data_points):
            recovered = basis_weights(alpha, grid.data_points) @ X
            assert_allclose(recovered, X[i], atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        grid = build_grid(5, 0, 12)
        X, Y = rng.normal(size=(2, 5, 3))
        a, b = rng.normal(size=2)
        combined = encode_plain(a * X + b * Y, grid)
        sx = encode_plain(X, grid)
        sy = encode_plain(Y, grid)
        for j, share in enumerate(combined):
            assert_allclose(
                share.payload, a * sx[j].payload + b * sy[j].payload, atol=1e-12
            )

    def test_requires_maskless_grid(self):
        grid = build_grid(2, 2, 8)
        with pytest.raises(ValueError):
            encode_plain(np.ones((2, 1)), grid)

    def test_dimension_mismatch(self):
        grid = build_grid(3, 0, 8)
        with pytest.raises(ValueError):
            encode_plain(np.ones((2, 1)), grid)


class TestEncodePrivate:
    def test_recovery_at_data_points_is_exact(self):
        grid = build_grid(3, 4, 16)
        X = np.random.default_rng(1).normal(size=(3, 2))
        spec = MaskSpec(4, 1.0, 5)
        masks = sample_masks(spec, 2)
        stacked = np.vstack([X, masks])
        for i, alpha in enumerate(grid.data_points):
            w = basis_weights(alpha, grid.alphas)
            assert np.array_equal(w @ stacked, X[i])

    def test_frozen_hand_expansion(self):
        # expected payload computed by expanding the four-term quotient sum
        # at z = 1 with the seeded masks (oracle recomputed below)
        grid = build_grid(2, 2, 4)
        X = np.array([[1.5, -2.0], [0.25, 3.0]])
        spec = MaskSpec(2, 1.0, 424242)
        shares = encode_private(X, grid, spec)
        assert_allclose(
            shares[0].payload[0],
            [1.8339566362311148, -2.926805635385643],
            rtol=1e-13,
        )
        stacked = np.vstack([X, sample_masks(spec, 2)])
        terms = [(-1) ** i / (1.0 - a) for i, a in enumerate(grid.alphas)]
        oracle = sum((t / sum(terms)) * stacked[i] for i, t in enumerate(terms))
        assert_allclose(shares[0].payload[0], oracle, rtol=1e-13)

    def test_vanishing_noise_matches_maskless_basis(self):
        grid = build_grid(4, 2, 12)
        X = np.random.default_rng(3).normal(size=(4, 3))
        spec = MaskSpec(2, 1e-30, 11)
        shares = encode_private(X, grid, spec)
        weights = weight_matrix(grid.zs, grid.alphas)
        plain_over_full_basis = weights[:, :4] @ X
        for j, share in enumerate(shares):
            assert_allclose(share.payload[0], plain_over_full_basis[j], atol=1e-12)

    def test_spec_grid_mismatch(self):
        grid = build_grid(2, 2, 8)
        with pytest.raises(ValueError):
            encode_private(np.ones((2, 1)), grid, MaskSpec(3, 1.0, 0))
        with pytest.raises(ValueError):
            encode_private(np.ones((2, 1)), grid, MaskSpec(2, 1.0, 0, mask_shift=5.0))


class TestDecode:
    def test_single_result_repeats_value(self):
        grid = build_grid(3, 0, 8)
        value = np.array([[2.0, -1.0]])
        result = decode([Share(4, float(grid.zs[4]), value)], grid)
        assert result.n == 1
        assert np.array_equal(result.values, np.repeat(value, 3, axis=0))

    def test_identity_pipeline_converges(self):
        grid = build_grid(4, 0, 64)
        X = np.random.default_rng(0).normal(size=(4, 3))
        result = decode(encode_plain(X, grid), grid)
        assert rme(result.values, X) < 1e-3

    def test_exact_at_received_nodes(self):
        grid = build_grid(4, 0, 16)
        X = np.random.default_rng(2).normal(size=(4, 2))
        shares = encode_plain(X, grid)
        nodes = np.array([s.z for s in shares])
        values = np.stack([s.payload for s in shares])
        back = berrut_evaluate(nodes, nodes, values)
        assert_allclose(back, values, atol=1e-12)

    def test_arrival_order_irrelevant(self):
        grid = build_grid(3, 0, 12)
        X = np.random.default_rng(4).normal(size=(3, 2))
        shares = encode_plain(X, grid)
        forward = decode(shares, grid)
        backward = decode(shares[::-1], grid)
        assert np.array_equal(forward.values, backward.values)
        assert forward.used_nodes == backward.used_nodes

    def test_empty_results(self):
        grid = build_grid(2, 0, 4)
        with pytest.raises(InsufficientResultsError):
            decode([], grid)

    def test_foreign_z_rejected(self):
        grid = build_grid(2, 0, 4)
        with pytest.raises(ValueError):
            decode([Share(1, 0.123, np.ones((1, 1)))], grid)

    def test_condition_warning_on_heavy_cancellation(self):
        # querying far from a tight node cluster cancels the denominator;
        # the value is still returned, with a warning
        from pbacc.errors import DecodeConditionWarning

        nodes = 10.0 + np.arange(100)[::-1] * 1e-5
        values = np.ones((100, 1, 1))
        with pytest.warns(DecodeConditionWarning):
            out = berrut_evaluate([0.0], nodes, values)
        assert np.isfinite(out).all()

    def test_straggler_monotonicity(self):
        grid = build_grid(4, 0, 32)
        full, half = [], []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(4, 2))
            shares = encode_plain(X, grid)
            full.append(rme(decode(shares, grid).values, X))
            keep = sorted(rng.choice(32, 16, replace=False).tolist())
            half.append(rme(decode([shares[j] for j in keep], grid).values, X))
        assert np.median(full) <= np.median(half)


class TestShareSerialization:
    def test_round_trip(self):
        share = Share(7, 0.25, np.array([[1.5, -2.0], [0.0, 3.25]]))
        back = share_from_json(share_to_json(share))
        assert back.node_index == 7 and back.z == 0.25
        assert np.array_equal(back.payload, share.payload)

    def test_documented_fields(self):
        import json

        doc = json.loads(share_to_json(Share(1, -0.5, np.zeros((2, 3)))))
        assert set(doc) == {"node_index", "z", "rows", "cols", "data"}
        assert doc["rows"] == 2 and doc["cols"] == 3 and len(doc["data"]) == 6
