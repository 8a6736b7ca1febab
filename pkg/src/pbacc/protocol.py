"""Multi-input secret-sharing simulation: share, compute in the coded domain,
reconstruct, and score precision against an uncoded reference.

Phase 1: every node encodes its own K x L input (optionally packing r
consecutive rows per interpolation point, optionally with private masks) and
sends the evaluation at z_j to node j. Phase 2: node j combines the target
function over the shares it received from all nodes. Phase 3: the master
decodes the aggregate at the data points from the fast subset of results.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .codec import MaskSpec, Share, decode, sample_masks, share_to_json, weight_matrix
from .errors import InsufficientResultsError, NumericalFailureError
from .grid import InterpolationGrid
from .seeding import DP_STREAM, INPUT_STREAM, MASK_STREAM, derive_seed

# Reference entries with magnitude below this are excluded from the relative
# error mean (and counted) rather than dividing by ~0.
ZERO_GUARD = 1e-12


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    return expit(x)


def swish(x):
    return x * expit(x)


def binary_step(x):
    # step(0) = 0: strict inequality keeps the convention deterministic.
    return (np.asarray(x) > 0).astype(float)


def identity(x):
    return np.asarray(x, dtype=float)


POINTWISE_FUNCTIONS = {
    "relu": relu,
    "sigmoid": sigmoid,
    "swish": swish,
    "binary_step": binary_step,
    "identity": identity,
}

SUM_COMBINE = "sum_over_nodes"
MEDIAN_COMBINE = "elementwise_median_over_nodes"


@dataclass(frozen=True)
class AggregateSpec:
    """Which function each node applies and how shares combine across nodes."""

    function: str
    combine: str

    def __post_init__(self):
        if self.function == "median":
            if self.combine != MEDIAN_COMBINE:
                raise ValueError("median pairs with elementwise_median_over_nodes")
        elif self.function in POINTWISE_FUNCTIONS:
            if self.combine != SUM_COMBINE:
                raise ValueError(f"{self.function} pairs with sum_over_nodes")
        elif self.function == "matmul":
            raise ValueError("matrix products run through the matmul pipeline")
        else:
            raise ValueError(f"unknown function id {self.function!r}")

    @classmethod
    def for_function(cls, function: str) -> "AggregateSpec":
        combine = MEDIAN_COMBINE if function == "median" else SUM_COMBINE
        return cls(function, combine)

    def pointwise(self):
        return identity if self.function == "median" else POINTWISE_FUNCTIONS[self.function]


@dataclass(frozen=True)
class NodeInput:
    node_index: int
    X: np.ndarray


@dataclass(frozen=True)
class StragglerModel:
    """Which workers respond in time: all, a seeded random subset, or a fixed set."""

    policy: str
    count: int = 0
    seed: int = 0
    members: tuple = ()

    @classmethod
    def none(cls) -> "StragglerModel":
        return cls("none")

    @classmethod
    def random(cls, count: int, seed: int) -> "StragglerModel":
        """Drop ``count`` uniformly random nodes."""
        if count < 0:
            raise ValueError(f"straggler count must be >= 0, got {count}")
        return cls("random", count=count, seed=seed)

    @classmethod
    def fixed(cls, fast_members) -> "StragglerModel":
        """Use exactly these node indices as the fast set."""
        return cls("fixed", members=tuple(sorted(int(j) for j in fast_members)))

    def fast_set(self, n_nodes: int) -> tuple:
        if self.policy == "none":
            return tuple(range(n_nodes))
        if self.policy == "fixed":
            if not self.members:
                raise InsufficientResultsError("fixed fast set is empty")
            return self.members
        if self.policy == "random":
            keep = n_nodes - self.count
            if keep < 1:
                raise InsufficientResultsError(
                    f"{self.count} stragglers would leave no fast nodes out of {n_nodes}"
                )
            rng = np.random.default_rng(np.random.SeedSequence(self.seed))
            chosen = rng.choice(n_nodes, size=keep, replace=False)
            return tuple(sorted(int(j) for j in chosen))
        raise ValueError(f"unknown straggler policy {self.policy!r}")


@dataclass(frozen=True, eq=False)
class RunReport:
    decoded: np.ndarray
    exact: np.ndarray
    rme: float
    n_used: int
    wall_time: float
    excluded_zeros: int


def rme(approx, exact) -> float:
    """Mean absolute elementwise relative error, skipping ~0 reference entries."""
    value, _ = rme_with_exclusions(approx, exact)
    return value


def rme_with_exclusions(approx, exact) -> tuple[float, int]:
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if approx.shape != exact.shape:
        raise ValueError(f"shape mismatch: {approx.shape} vs {exact.shape}")
    keep = np.abs(exact) > ZERO_GUARD
    excluded = int(keep.size - keep.sum())
    if not keep.any():
        raise NumericalFailureError("every reference entry sits below the zero guard")
    value = float(np.mean(np.abs((approx[keep] - exact[keep]) / exact[keep])))
    return value, excluded


def aggregate_rme(approx, exact) -> float:
    """Entrywise-L1 error ratio, ||approx - exact||_1 / ||exact||_1.

    Matrix products cross zero densely, so the per-entry relative mean is
    dominated by near-zero reference entries; the aggregate ratio is the
    meaningful precision figure for the matrix pipelines.
    """
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if approx.shape != exact.shape:
        raise ValueError(f"shape mismatch: {approx.shape} vs {exact.shape}")
    denom = float(np.abs(exact).sum())
    if denom <= ZERO_GUARD:
        raise NumericalFailureError("reference matrix is numerically zero")
    return float(np.abs(approx - exact).sum() / denom)


def _stack_inputs(inputs) -> np.ndarray:
    if isinstance(inputs, np.ndarray):
        data = np.asarray(inputs, dtype=float)
        if data.ndim != 3:
            raise ValueError("array inputs must have shape (nodes, K, L)")
        return data
    ordered = sorted(inputs, key=lambda item: item.node_index)
    if [item.node_index for item in ordered] != list(range(len(ordered))):
        raise ValueError("node inputs must cover indices 0..N-1 exactly once")
    return np.stack([np.atleast_2d(np.asarray(item.X, dtype=float)) for item in ordered])


def exact_reference(inputs, spec: AggregateSpec | str) -> np.ndarray:
    """Uncoded computation of the target aggregate; the precision oracle."""
    if isinstance(spec, str):
        if spec == "matmul":
            data = _stack_inputs(inputs)
            if data.shape[0] != 2:
                raise ValueError("matmul reference expects exactly two inputs")
            return data[0] @ data[1].T
        spec = AggregateSpec.for_function(spec)
    data = _stack_inputs(inputs)
    if spec.combine == MEDIAN_COMBINE:
        return np.median(data, axis=0)
    return spec.pointwise()(data).sum(axis=0)


def _trace_shares(sink, phase, sender, receiver, share):
    record = {
        "phase": phase,
        "from": sender,
        "to": receiver,
        "share": json.loads(share_to_json(share)),
    }
    sink.write(json.dumps(record) + "\n")


def _simulate(grid, data, masks_by_node, agg, stragglers, rows_per_point, trace):
    """Common three-phase engine. ``data`` is (nodes, K_total, L)."""
    start = time.perf_counter()
    n_nodes, total_rows, cols = data.shape
    r = rows_per_point
    if total_rows % r or total_rows // r != grid.K:
        raise ValueError(
            f"{total_rows} rows at {r} rows/point need {total_rows // r} data "
            f"points, grid has {grid.K}"
        )
    weights = weight_matrix(grid.zs, grid.alphas)
    data_w = weights[:, : grid.K]
    blocks = data.reshape(n_nodes, grid.K, r, cols)
    # Phase 1: shares[i, j] is what node i sends to node j.
    shares = np.einsum("jp,iprl->ijrl", data_w, blocks, optimize=True)
    if masks_by_node is not None:
        mask_w = weights[:, grid.K :]
        mask_blocks = masks_by_node.reshape(n_nodes, grid.T, r, cols)
        shares += np.einsum("js,isrl->ijrl", mask_w, mask_blocks, optimize=True)
    if trace is not None:
        for i in range(n_nodes):
            for j in range(grid.N):
                _trace_shares(
                    trace, "sharing", i, j, Share(j, float(grid.zs[j]), shares[i, j])
                )
    # Phase 2: each node combines the function over everything it received.
    pointwise = agg.pointwise()
    if agg.combine == MEDIAN_COMBINE:
        combined = np.median(pointwise(shares), axis=0)
    else:
        combined = pointwise(shares).sum(axis=0)
    fast = stragglers.fast_set(grid.N)
    results = [Share(j, float(grid.zs[j]), combined[j]) for j in fast]
    if trace is not None:
        for share in results:
            _trace_shares(trace, "computation", share.node_index, "master", share)
    # Phase 3: reconstruct at the data points and unstack the row blocks.
    outcome = decode(results, grid)
    decoded = outcome.values
    if trace is not None:
        trace.write(
            json.dumps(
                {"phase": "reconstruction", "n": outcome.n, "used_nodes": list(fast)}
            )
            + "\n"
        )
    return decoded, outcome.n, start


def run_pbss(
    inputs,
    grid: InterpolationGrid,
    mask: MaskSpec,
    agg: AggregateSpec,
    stragglers: StragglerModel,
    rows_per_point: int = 1,
    trace=None,
) -> RunReport:
    """Private protocol: every node encodes with its own mask stream."""
    data = _stack_inputs(inputs)
    n_nodes, total_rows, cols = data.shape
    if n_nodes != grid.N:
        raise ValueError(f"{n_nodes} inputs for a grid of {grid.N} nodes")
    if mask.T != grid.T * rows_per_point:
        raise ValueError(
            f"MaskSpec.T = {mask.T} must equal grid.T * rows_per_point = "
            f"{grid.T * rows_per_point}"
        )
    if mask.mask_shift != grid.mask_shift:
        raise ValueError("grid and MaskSpec disagree on mask_shift")
    masks = np.stack(
        [
            sample_masks(replace(mask, seed=derive_seed(mask.seed, MASK_STREAM, i)), cols)
            for i in range(n_nodes)
        ]
    )
    decoded, n_used, start = _simulate(
        grid, data, masks, agg, stragglers, rows_per_point, trace
    )
    exact = exact_reference(data, agg)
    value, excluded = rme_with_exclusions(decoded, exact)
    return RunReport(decoded, exact, value, n_used, time.perf_counter() - start, excluded)


def run_bss(
    inputs,
    grid: InterpolationGrid,
    agg: AggregateSpec,
    stragglers: StragglerModel,
    rows_per_point: int = 1,
    trace=None,
) -> RunReport:
    """Baseline without masks; requires a grid with no mask points."""
    if grid.T != 0:
        raise ValueError("run_bss requires a grid without mask points")
    data = _stack_inputs(inputs)
    if data.shape[0] != grid.N:
        raise ValueError(f"{data.shape[0]} inputs for a grid of {grid.N} nodes")
    decoded, n_used, start = _simulate(
        grid, data, None, agg, stragglers, rows_per_point, trace
    )
    exact = exact_reference(data, agg)
    value, excluded = rme_with_exclusions(decoded, exact)
    return RunReport(decoded, exact, value, n_used, time.perf_counter() - start, excluded)


def run_bss_dp(
    inputs,
    grid: InterpolationGrid,
    agg: AggregateSpec,
    stragglers: StragglerModel,
    sigma_dp: float,
    seed: int,
    rows_per_point: int = 1,
    trace=None,
) -> RunReport:
    """Differential-privacy baseline: perturb raw inputs, then encode plainly.

    Each node adds i.i.d. Gaussian noise of deviation ``sigma_dp`` to its data
    before the mask-free encoding; the reference stays the clean aggregate.
    """
    if not sigma_dp > 0:
        raise ValueError(f"sigma_dp must be positive, got {sigma_dp}")
    if grid.T != 0:
        raise ValueError("run_bss_dp requires a grid without mask points")
    data = _stack_inputs(inputs)
    if data.shape[0] != grid.N:
        raise ValueError(f"{data.shape[0]} inputs for a grid of {grid.N} nodes")
    noisy = np.empty_like(data)
    for i in range(data.shape[0]):
        rng = np.random.default_rng(
            np.random.SeedSequence(derive_seed(seed, DP_STREAM, i))
        )
        noisy[i] = data[i] + rng.normal(0.0, sigma_dp, size=data[i].shape)
    decoded, n_used, start = _simulate(
        grid, noisy, None, agg, stragglers, rows_per_point, trace
    )
    exact = exact_reference(data, agg)
    value, excluded = rme_with_exclusions(decoded, exact)
    return RunReport(decoded, exact, value, n_used, time.perf_counter() - start, excluded)


def generate_inputs(
    n_nodes: int,
    rows: int,
    cols: int,
    s: float,
    seed: int,
    band: tuple[float, float] = (-1.0, 1.0),
) -> np.ndarray:
    """Per-node uniform inputs on [band[0]*s, band[1]*s], nudged away from 0.

    Magnitudes stay above 1e-6 * s so relative errors stay well defined.
    """
    out = np.empty((n_nodes, rows, cols))
    for i in range(n_nodes):
        rng = np.random.default_rng(
            np.random.SeedSequence(derive_seed(seed, INPUT_STREAM, i))
        )
        out[i] = _banded_uniform(rng, (rows, cols), s, band)
    return out


def generate_matrix(
    rows: int, cols: int, s: float, seed: int, density: float = 1.0
) -> np.ndarray:
    """A single uniform matrix, optionally sparsified to ``density``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    matrix = _banded_uniform(rng, (rows, cols), s, (-1.0, 1.0))
    if density < 1.0:
        matrix *= rng.random((rows, cols)) < density
    return matrix


def _banded_uniform(rng, shape, s, band):
    low, high = band
    raw = s * rng.uniform(low, high, size=shape)
    tiny = np.abs(raw) < 1e-6 * s
    if tiny.any():
        sign = np.where(raw[tiny] >= 0, 1.0, -1.0)
        raw[tiny] = sign * 1e-6 * s
    return raw
