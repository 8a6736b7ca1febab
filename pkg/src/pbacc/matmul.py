"""Approximate distributed matrix multiplication over coded shares.

Every row of the input matrix is kept in place and scaled by its own basis
weight, so a coded share has the same shape as the input. A worker holding
coded A and B multiplies them, divides column j by the data weight of column
j's interpolation point, and sums the row blocks; the resulting compressed
row shares decode exactly like vector shares, one product row block per data
point.

Two pipelines are provided on top:

* a per-node path (``encode_packed`` / ``worker_multiply`` /
  ``decode_product``) that materializes every coded matrix, for desk-scale
  runs and oracle tests;
* an algebraically identical batched path (``coded_product_shares``) that
  precomputes the four Gram products between data and masks once and scales
  them per node, for sweep-scale runs where per-node coded matrices would not
  fit in memory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .codec import MaskSpec, Share, basis_weights, decode, sample_masks, weight_matrix
from .errors import (
    CapacityError,
    DegenerateWeightError,
    IncompleteAssemblyError,
    InsufficientResultsError,
)
from .grid import InterpolationGrid
from .seeding import MATRIX_STREAM, derive_seed

# Data weights smaller than this at a worker's point indicate a z that
# essentially coincides with a data point; grid validation makes this
# unreachable, the guard is defense in depth.
WEIGHT_GUARD = 1e-14


@dataclass(frozen=True)
class RowPacking:
    """How many consecutive matrix rows share one interpolation point."""

    rows_per_point: int = 1

    def __post_init__(self):
        if self.rows_per_point < 1:
            raise ValueError(f"rows_per_point must be >= 1, got {self.rows_per_point}")

    def point_count(self, row_count: int) -> int:
        if row_count % self.rows_per_point:
            raise ValueError(
                f"rows_per_point = {self.rows_per_point} does not divide "
                f"{row_count} rows"
            )
        return row_count // self.rows_per_point


def _validate_matrix_grid(matrix, grid, packing, mask):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {matrix.shape}")
    points = packing.point_count(matrix.shape[0])
    if points != grid.K:
        raise ValueError(
            f"{matrix.shape[0]} rows at {packing.rows_per_point} rows/point "
            f"need {points} data points, grid has {grid.K}"
        )
    if mask is None:
        if grid.T != 0:
            raise ValueError("grid carries mask points but no MaskSpec was given")
    else:
        if grid.T != grid.K:
            raise ValueError(
                "private matrix encoding uses one mask point per data point "
                f"(grid.T = {grid.T}, grid.K = {grid.K})"
            )
        if mask.T != matrix.shape[0]:
            raise ValueError(
                f"MaskSpec.T = {mask.T} must equal the row count {matrix.shape[0]}"
            )
        if mask.mask_shift != grid.mask_shift:
            raise ValueError("grid and MaskSpec disagree on mask_shift")
    return matrix


def encode_packed(
    matrix,
    grid: InterpolationGrid,
    packing: RowPacking = RowPacking(),
    mask: MaskSpec | None = None,
) -> list[Share]:
    """Coded matrix shares with r consecutive rows per interpolation point.

    Row block i of share j is t_i(z_j) * block_i, plus
    t_i(z_j) * t_{P+i}(z_j) * mask_block_i in the private variant (one mask
    block per data block).
    """
    matrix = _validate_matrix_grid(matrix, grid, packing, mask)
    r = packing.rows_per_point
    weights = weight_matrix(grid.zs, grid.alphas)
    data_w = weights[:, : grid.K]
    masks = sample_masks(mask, matrix.shape[1]) if mask is not None else None
    shares = []
    for j in range(grid.N):
        row_scale = np.repeat(data_w[j], r)[:, None]
        entries = row_scale * matrix
        if masks is not None:
            mask_scale = np.repeat(data_w[j] * weights[j, grid.K :], r)[:, None]
            entries = entries + mask_scale * masks
        shares.append(Share(j, float(grid.zs[j]), entries))
    return shares


def encode_matrix_rows(
    matrix, grid: InterpolationGrid, mask: MaskSpec | None = None
) -> list[Share]:
    """One row per interpolation point; the unpacked special case."""
    return encode_packed(matrix, grid, RowPacking(1), mask)


def worker_multiply(
    coded_a: Share,
    coded_b: Share,
    grid: InterpolationGrid,
    packing: RowPacking = RowPacking(),
) -> Share:
    """One worker's compressed product share from its two coded matrices.

    Computes coded_a @ coded_b.T, rescales column j by the data weight of the
    point owning column j, and sums the row blocks into an (r x rows) payload.
    """
    if coded_a.z != coded_b.z:
        raise ValueError("coded operands come from different evaluation points")
    a = np.atleast_2d(coded_a.payload)
    b = np.atleast_2d(coded_b.payload)
    if a.shape != b.shape:
        raise ValueError(f"operand shapes differ: {a.shape} vs {b.shape}")
    r = packing.rows_per_point
    if packing.point_count(a.shape[0]) != grid.K:
        raise ValueError("operand rows do not match the grid's data points")
    data_w = basis_weights(coded_a.z, grid.alphas)[: grid.K]
    if np.any(np.abs(data_w) < WEIGHT_GUARD):
        raise DegenerateWeightError(
            f"data weight underflow at z = {coded_a.z!r}; the evaluation point "
            "coincides with a data point"
        )
    product = a @ b.T
    product /= np.repeat(data_w, r)[None, :]
    payload = product.reshape(grid.K, r, a.shape[0]).sum(axis=0)
    return Share(coded_a.node_index, coded_a.z, payload)


def decode_product(row_shares, grid: InterpolationGrid) -> np.ndarray:
    """Assemble the (rows x rows) product approximation from row shares."""
    return decode(row_shares, grid).values


def coded_product_shares(
    a,
    b,
    grid: InterpolationGrid,
    packing: RowPacking = RowPacking(),
    mask_a: MaskSpec | None = None,
    mask_b: MaskSpec | None = None,
    node_indices=None,
) -> list[Share]:
    """Product row shares for many nodes without materializing coded matrices.

    Expanding (D A + D Dm Ra)(D B + D Dm Rb)^T with diagonal weight matrices
    D and Dm, then applying the column rescale and the row-block sum, leaves
    every node's share a weighted combination of four node-independent Gram
    products A B^T, A Rb^T, Ra B^T and Ra Rb^T. Those are computed once; each
    node then costs O(rows^2). The result is mathematically identical to the
    per-node ``worker_multiply`` path, differing only by rounding.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"operand shapes differ: {a.shape} vs {b.shape}")
    if (mask_a is None) != (mask_b is None):
        raise ValueError("mask specs must be given for both operands or neither")
    a = _validate_matrix_grid(a, grid, packing, mask_a)
    b = _validate_matrix_grid(b, grid, packing, mask_b)
    if node_indices is None:
        node_indices = range(grid.N)
    node_indices = [int(j) for j in node_indices]
    rows = a.shape[0]
    r = packing.rows_per_point
    points = grid.K
    m = len(node_indices)

    weights = weight_matrix(grid.zs[node_indices], grid.alphas)
    data_w = weights[:, :points]
    if np.any(np.abs(data_w) < WEIGHT_GUARD):
        raise DegenerateWeightError("data weight underflow at an evaluation point")

    gram = (a @ b.T).reshape(points, r * rows)
    payloads = (data_w @ gram).reshape(m, r, rows)
    if mask_a is not None:
        masks_a = sample_masks(mask_a, a.shape[1])
        masks_b = sample_masks(mask_b, b.shape[1])
        mask_w = weights[:, points:]
        dm_w = data_w * mask_w
        # Mask weight of the point owning each result column (the B side).
        col_scale = np.repeat(mask_w, r, axis=1)[:, None, :]
        cross_b = (a @ masks_b.T).reshape(points, r * rows)
        cross_a = (masks_a @ b.T).reshape(points, r * rows)
        gram_m = (masks_a @ masks_b.T).reshape(points, r * rows)
        payloads = (
            payloads
            + (data_w @ cross_b).reshape(m, r, rows) * col_scale
            + (dm_w @ cross_a).reshape(m, r, rows)
            + (dm_w @ gram_m).reshape(m, r, rows) * col_scale
        )
    return [
        Share(j, float(grid.zs[j]), payloads[idx])
        for idx, j in enumerate(node_indices)
    ]


def distributed_product(
    a,
    b,
    grid: InterpolationGrid,
    packing: RowPacking = RowPacking(),
    mask_a: MaskSpec | None = None,
    mask_b: MaskSpec | None = None,
    fast_nodes=None,
) -> np.ndarray:
    """Full direct pipeline: coded shares from the fast set, then decode."""
    shares = coded_product_shares(
        a, b, grid, packing, mask_a, mask_b, node_indices=fast_nodes
    )
    return decode_product(shares, grid)


@dataclass(frozen=True)
class BlockPlan:
    """Assignment of worker nodes to vertical block pairs (x, y)."""

    block_count: int
    cols_per_block: int
    assignment: dict

    @property
    def groups(self) -> dict:
        """(x, y) -> sorted tuple of node indices."""
        out = {}
        for node, pair in self.assignment.items():
            out.setdefault(pair, []).append(node)
        return {pair: tuple(sorted(nodes)) for pair, nodes in out.items()}


def plan_blocks(a, b, block_count: int, node_count: int) -> BlockPlan:
    """Split both inputs into ``block_count`` vertical blocks and assign nodes.

    Nodes are spread round-robin over the block_count**2 pairs so every
    group's evaluation points span the whole interval; each group computes one
    block of the transposed product.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"operand shapes differ: {a.shape} vs {b.shape}")
    if block_count < 1:
        raise ValueError(f"block_count must be >= 1, got {block_count}")
    cols = a.shape[1]
    if cols % block_count:
        raise ValueError(f"block_count = {block_count} does not divide {cols} columns")
    pairs = block_count * block_count
    if node_count < pairs:
        raise CapacityError(
            f"block partition needs at least {pairs} nodes, got {node_count}"
        )
    assignment = {
        node: (node % pairs // block_count, node % pairs % block_count)
        for node in range(node_count)
    }
    return BlockPlan(block_count, cols // block_count, assignment)


def assemble_blocks(decoded: dict, plan: BlockPlan) -> np.ndarray:
    """Stitch the (x, y) grid of decoded blocks into the full product."""
    b = plan.block_count
    h = plan.cols_per_block
    missing = [(x, y) for x in range(b) for y in range(b) if (x, y) not in decoded]
    if missing:
        raise IncompleteAssemblyError(missing)
    out = np.empty((b * h, b * h))
    for (x, y), block in decoded.items():
        block = np.asarray(block, dtype=float)
        if block.shape != (h, h):
            raise ValueError(f"block {(x, y)} has shape {block.shape}, expected {(h, h)}")
        out[x * h : (x + 1) * h, y * h : (y + 1) * h] = block
    return out


def blocked_product(
    a,
    b,
    plan: BlockPlan,
    grid: InterpolationGrid,
    packing: RowPacking = RowPacking(),
    mask_a: MaskSpec | None = None,
    mask_b: MaskSpec | None = None,
    fast_nodes=None,
    restrict_to_groups: bool = False,
) -> np.ndarray:
    """Approximate a.T @ b through independent per-block-pair pipelines.

    ``grid`` is sized for a single block (cols_per_block rows at the given
    packing). Mask streams are derived per operand block, so groups sharing a
    block of A reuse the same encoding of it.

    By default every block pair is evaluated at the full fast set (each node
    computes the product for all pairs at its own point); with
    ``restrict_to_groups`` each pair decodes only from its plan group's fast
    members, trading precision for a single product per node.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = plan.cols_per_block
    fast = None if fast_nodes is None else set(int(j) for j in fast_nodes)
    decoded = {}
    for (x, y), nodes in plan.groups.items():
        pool = nodes if restrict_to_groups else range(grid.N)
        members = [j for j in pool if fast is None or j in fast]
        if not members:
            raise InsufficientResultsError(
                f"block pair {(x, y)} has no fast members to decode from"
            )
        block_mask_a = block_mask_b = None
        if mask_a is not None:
            block_mask_a = replace(
                mask_a, T=h, seed=derive_seed(mask_a.seed, MATRIX_STREAM, 0, x)
            )
            block_mask_b = replace(
                mask_b, T=h, seed=derive_seed(mask_b.seed, MATRIX_STREAM, 1, y)
            )
        shares = coded_product_shares(
            a[:, x * h : (x + 1) * h].T,
            b[:, y * h : (y + 1) * h].T,
            grid,
            packing,
            block_mask_a,
            block_mask_b,
            node_indices=members,
        )
        decoded[(x, y)] = decode_product(shares, grid)
    return assemble_blocks(decoded, plan)
