"""Berrut rational encoding of data rows into shares, and decoding of results.

The encoding of rows X_0..X_{K-1} (optionally followed by mask rows) at a
point z is sum_i q_i(z) * row_i, where the basis weights

    q_i(z) = ((-1)^i / (z - p_i)) / sum_j ((-1)^j / (z - p_j))

run over the concatenated interpolation points p. The weights sum to 1 for
every z and collapse to an exact indicator at z = p_i, which is what makes
recovery at the data points exact.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DecodeConditionWarning, InsufficientResultsError
from .grid import InterpolationGrid

# Queries closer than this to an interpolation point snap to the exact
# indicator vector; direct division would overflow near the pole.
POLE_GUARD = 1e-14

# Relative cancellation in the decoder denominator below this (six digits
# lost) triggers a condition warning instead of a failure; the decoded value
# is still returned.
CANCELLATION_FLOOR = 1e-6


def weight_matrix(zs, points) -> np.ndarray:
    """Basis weights for every z in ``zs`` over ``points``; one row per z.

    Rows sum to 1; a row whose z coincides with points[i] is exactly e_i.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    points = np.asarray(points, dtype=float)
    diff = zs[:, None] - points[None, :]
    hits = np.abs(diff) < POLE_GUARD
    signs = np.where(np.arange(points.size) % 2, -1.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = signs / diff
        weights = terms / terms.sum(axis=1, keepdims=True)
    hit_rows = hits.any(axis=1)
    if hit_rows.any():
        weights[hit_rows] = 0.0
        weights[hits] = 1.0
    return weights


def basis_weights(z: float, points) -> np.ndarray:
    """Basis weights of a single query point. See ``weight_matrix``."""
    return weight_matrix([z], points)[0]


@dataclass(frozen=True)
class MaskSpec:
    """Privacy-noise configuration: T mask rows of variance sigma_n**2 / T."""

    T: int
    sigma_n: float
    seed: int
    mask_shift: float = 10.0

    def __post_init__(self):
        if self.T < 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if self.T > 0 and not self.sigma_n > 0:
            raise ValueError(f"sigma_n must be > 0 when T > 0, got {self.sigma_n}")


@dataclass(frozen=True, eq=False)
class Share:
    """One node's encoded view: evaluation point plus a 2-D payload.

    The payload is 1 x L for plain vector encodings, r x L for packed
    encodings, and (rows x cols) for coded matrices.
    """

    node_index: int
    z: float
    payload: np.ndarray


@dataclass(frozen=True, eq=False)
class DecodingResult:
    values: np.ndarray
    used_nodes: tuple
    n: int


def sample_masks(spec: MaskSpec, cols: int) -> np.ndarray:
    """T x cols i.i.d. Gaussian mask rows, reproducible from ``spec.seed``."""
    if spec.T < 1:
        raise ValueError("sampling masks requires T >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    scale = spec.sigma_n / np.sqrt(spec.T)
    return rng.normal(0.0, scale, size=(spec.T, cols))


def _as_data(data) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError(f"data must be a 2-D matrix, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise ValueError("data entries must be finite")
    return data


def encode_plain(data, grid: InterpolationGrid) -> list[Share]:
    """Encode K rows into N shares without masks; requires grid.T == 0."""
    data = _as_data(data)
    if grid.T != 0:
        raise ValueError("encode_plain requires a grid without mask points")
    if data.shape[0] != grid.K:
        raise ValueError(f"data has {data.shape[0]} rows but grid expects {grid.K}")
    weights = weight_matrix(grid.zs, grid.data_points)
    payloads = weights @ data
    return [
        Share(j, float(grid.zs[j]), payloads[j : j + 1])
        for j in range(grid.N)
    ]


def encode_private(data, grid: InterpolationGrid, spec: MaskSpec) -> list[Share]:
    """Encode K data rows plus T Gaussian mask rows into N shares.

    Weights are built over all K + T interpolation points, so evaluating the
    encoding at a data point still returns the raw row (mask weights vanish
    there) while every share mixes data with noise.
    """
    data = _as_data(data)
    if spec.T < 1:
        raise ValueError("encode_private requires T >= 1; use encode_plain instead")
    if grid.T != spec.T:
        raise ValueError(f"grid has {grid.T} mask points but spec.T = {spec.T}")
    if grid.mask_shift != spec.mask_shift:
        raise ValueError("grid and MaskSpec disagree on mask_shift")
    if data.shape[0] != grid.K:
        raise ValueError(f"data has {data.shape[0]} rows but grid expects {grid.K}")
    masks = sample_masks(spec, data.shape[1])
    stacked = np.vstack([data, masks])
    weights = weight_matrix(grid.zs, grid.alphas)
    payloads = weights @ stacked
    return [
        Share(j, float(grid.zs[j]), payloads[j : j + 1])
        for j in range(grid.N)
    ]


def _checked_decode_weights(queries: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Decoding weights of ``queries`` over ``nodes``, warning on cancellation.

    Alternating-sign barycentric weights with the two extreme received nodes
    halved: on the full second-kind evaluation grid these are the classical
    barycentric weights, which keeps the reconstruction of smooth encodings
    accurate instead of first-order, and on straggler subsets they degrade
    gracefully to the plain alternating form.
    """
    signs = np.where(np.arange(nodes.size) % 2, -1.0, 1.0)
    if nodes.size > 1:
        signs = signs.copy()
        signs[0] *= 0.5
        signs[-1] *= 0.5
    diff = queries[:, None] - nodes[None, :]
    hits = np.abs(diff) < POLE_GUARD
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = signs / diff
        denom = terms.sum(axis=1)
        gross = np.abs(terms).sum(axis=1)
        weights = terms / denom[:, None]
    clean = ~hits.any(axis=1)
    if clean.any():
        cancel = np.abs(denom[clean]) / gross[clean]
        if (cancel < CANCELLATION_FLOOR).any():
            warnings.warn(
                "decoder denominator suffers heavy cancellation; the "
                "interpolant from the received set is ill-conditioned",
                DecodeConditionWarning,
                stacklevel=3,
            )
    if hits.any():
        weights[hits.any(axis=1)] = 0.0
        weights[hits] = 1.0
    return weights


def berrut_evaluate(queries, nodes, values) -> np.ndarray:
    """Evaluate the Berrut interpolant through (nodes[i], values[i]) at queries.

    ``values`` may carry any trailing shape; exact at the nodes themselves.
    """
    queries = np.atleast_1d(np.asarray(queries, dtype=float))
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    weights = _checked_decode_weights(queries, nodes)
    return np.tensordot(weights, values, axes=(1, 0))


def decode(results, grid: InterpolationGrid) -> DecodingResult:
    """Berrut-decode worker results at the grid's data points.

    ``results`` are Shares whose z must match the node's evaluation point.
    Results are reduced in sorted node-index order, so the output is
    bit-identical regardless of arrival order. Each payload block decoded at
    data point p is stacked in point order: payloads of shape (r, L) yield
    values of shape (grid.K * r, L).
    """
    results = list(results)
    if not results:
        raise InsufficientResultsError("no worker results to decode")
    results.sort(key=lambda share: share.node_index)
    indices = [share.node_index for share in results]
    if len(set(indices)) != len(indices):
        raise ValueError("duplicate node indices in results")
    for share in results:
        if not 0 <= share.node_index < grid.N:
            raise ValueError(f"node index {share.node_index} outside grid")
        if share.z != grid.zs[share.node_index]:
            raise ValueError(
                f"share from node {share.node_index} carries z={share.z!r}, "
                f"expected {grid.zs[share.node_index]!r}"
            )
    nodes = np.array([share.z for share in results])
    stacked = np.stack([np.atleast_2d(share.payload) for share in results])
    decoded = berrut_evaluate(grid.data_points, nodes, stacked)
    rows, cols = decoded.shape[1], decoded.shape[2]
    values = decoded.reshape(grid.K * rows, cols)
    return DecodingResult(values=values, used_nodes=tuple(indices), n=len(indices))


def share_to_json(share: Share) -> str:
    """Serialize a share to the documented JSON form (row-major float payload)."""
    payload = np.atleast_2d(share.payload)
    return json.dumps(
        {
            "node_index": share.node_index,
            "z": share.z,
            "rows": payload.shape[0],
            "cols": payload.shape[1],
            "data": payload.ravel().tolist(),
        }
    )


def share_from_json(text: str) -> Share:
    doc = json.loads(text)
    payload = np.array(doc["data"], dtype=float).reshape(doc["rows"], doc["cols"])
    return Share(int(doc["node_index"]), float(doc["z"]), payload)
