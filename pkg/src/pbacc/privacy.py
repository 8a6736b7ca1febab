"""Upper bounds on information leaked to colluding semi-honest nodes.

A set of c colluders observing shares sees Y = Q X + Qm R, where Q and Qm
hold the data and mask basis weights at the colluders' evaluation points.
Treating this as a vector Gaussian channel with amplitude-bounded inputs,
the leaked mutual information is bounded by

    I_L <= log2 det(I_c + (s^2 T / sigma_n^2) * Sm^{-1} S)

with S = Q Q^T and Sm = Qm Qm^T. Sm is typically ill-conditioned (the mask
points sit far from the evaluation interval, so its rows are nearly
collinear) and is regularized by clamping its spectrum from below before
inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import weight_matrix
from .errors import NumericalFailureError
from .grid import InterpolationGrid

LN2 = math.log(2.0)

# Relative floor applied to the mask covariance spectrum when no explicit
# floor is given: 1e-10 * mean eigenvalue.
DEFAULT_FLOOR_SCALE = 1e-10


@dataclass(frozen=True)
class CollusionScenario:
    """A concrete set of colluding node indices."""

    node_indices: tuple

    def __post_init__(self):
        indices = tuple(int(i) for i in self.node_indices)
        if len(indices) < 1:
            raise ValueError("a scenario needs at least one colluder")
        if len(set(indices)) != len(indices):
            raise ValueError("colluder indices must be distinct")
        object.__setattr__(self, "node_indices", indices)

    @property
    def c(self) -> int:
        return len(self.node_indices)

    @classmethod
    def prefix(cls, c: int) -> "CollusionScenario":
        """The first c evaluation points; the default sweep policy."""
        return cls(tuple(range(c)))


@dataclass(frozen=True)
class LeakageReport:
    bits: float
    bits_per_point: float
    epsilon: float
    satisfied: bool
    regularization_floor: float


def uniform_entropy_bits(s: float) -> float:
    """Entropy log2(2s) of an amplitude-s uniform entry; calibration baseline."""
    return math.log2(2.0 * s)


def interpolation_matrices(grid: InterpolationGrid, scenario: CollusionScenario):
    """(Q, Qm): data and mask basis weights at the colluders' points.

    Row h of Q holds q_i(z_{j_h}) for the K data indices; row h of Qm holds
    the T mask indices. Each concatenated row sums to 1.
    """
    if grid.T < 1:
        raise ValueError("leakage analysis requires a grid with mask points")
    for j in scenario.node_indices:
        if not 0 <= j < grid.N:
            raise ValueError(f"colluder index {j} outside the evaluation grid")
    weights = weight_matrix(grid.zs[list(scenario.node_indices)], grid.alphas)
    return weights[:, : grid.K], weights[:, grid.K :]


def regularize_covariance(matrix, floor: float) -> np.ndarray:
    """Clamp the spectrum of a symmetric matrix from below by ``floor``."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    scale = max(np.abs(matrix).max(), 1.0)
    if not np.allclose(matrix, matrix.T, rtol=1e-10, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    if not floor > 0:
        raise ValueError(f"floor must be positive, got {floor}")
    sym = (matrix + matrix.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    clamped = np.maximum(eigvals, floor)
    out = (eigvecs * clamped) @ eigvecs.T
    return (out + out.T) / 2.0


def default_floor(mask_cov: np.ndarray) -> float:
    p = mask_cov.shape[0]
    trace = float(np.trace(mask_cov))
    return DEFAULT_FLOOR_SCALE * max(trace / p, np.finfo(float).tiny)


def _logdet_ratio(mask_cov: np.ndarray, data_cov: np.ndarray, gamma: float) -> float:
    """log det(I + gamma * mask_cov^{-1} data_cov) via two PD factorizations.

    Computed as logdet(mask_cov + gamma * data_cov) - logdet(mask_cov), which
    keeps both arguments symmetric positive definite.
    """
    bumped = mask_cov + gamma * data_cov
    bumped = (bumped + bumped.T) / 2.0
    sign1, logdet1 = np.linalg.slogdet(bumped)
    sign0, logdet0 = np.linalg.slogdet(mask_cov)
    if sign1 <= 0 or sign0 <= 0 or not np.isfinite(logdet1 - logdet0):
        raise NumericalFailureError(
            "leakage determinant is not finite positive",
            diagnostics={
                "sign_bumped": float(sign1),
                "sign_mask": float(sign0),
                "cond_mask": float(np.linalg.cond(mask_cov)),
                "cond_bumped": float(np.linalg.cond(bumped)),
            },
        )
    return logdet1 - logdet0


def leakage_bound(
    grid: InterpolationGrid,
    scenario: CollusionScenario,
    s: float,
    sigma_n: float,
    T: int | None = None,
    floor: float | None = None,
    epsilon: float = math.inf,
) -> LeakageReport:
    """Bound in bits on the information c colluders learn about the data."""
    if T is None:
        T = grid.T
    if T != grid.T or T < 1:
        raise ValueError(f"T = {T} must match the grid's mask count {grid.T}")
    if not sigma_n > 0:
        raise ValueError(f"sigma_n must be positive, got {sigma_n}")
    q_data, q_mask = interpolation_matrices(grid, scenario)
    data_cov = q_data @ q_data.T
    data_cov = (data_cov + data_cov.T) / 2.0
    mask_cov_raw = q_mask @ q_mask.T
    floor_val = default_floor(mask_cov_raw) if floor is None else float(floor)
    mask_cov = regularize_covariance(mask_cov_raw, floor_val)
    gamma = s * s * T / (sigma_n * sigma_n)
    bits = max(_logdet_ratio(mask_cov, data_cov, gamma) / LN2, 0.0)
    per_point = bits / grid.K
    return LeakageReport(
        bits=bits,
        bits_per_point=per_point,
        epsilon=epsilon,
        satisfied=per_point < epsilon,
        regularization_floor=floor_val,
    )


def leakage_curve(
    grid: InterpolationGrid,
    s: float,
    sigma_n_values,
    T: int,
    c_values,
    floor: float | None,
    scenario_builder=None,
) -> list[tuple[int, float, float, float]]:
    """Sweep (c, sigma_n) and return rows (c, sigma_n, bits, bits_per_point).

    The scenario for each c defaults to the first c evaluation points; pass
    ``scenario_builder`` (c -> CollusionScenario) to override. c = 0 yields an
    exact 0. Rows are emitted in deterministic (sigma_n, c) order.
    """
    if scenario_builder is None:
        scenario_builder = CollusionScenario.prefix
    rows = []
    for sigma_n in sigma_n_values:
        for c in c_values:
            if c == 0:
                rows.append((0, float(sigma_n), 0.0, 0.0))
                continue
            report = leakage_bound(
                grid, scenario_builder(c), s, sigma_n, T=T, floor=floor
            )
            rows.append((int(c), float(sigma_n), report.bits, report.bits_per_point))
    return rows


def sampled_worst_case(
    grid: InterpolationGrid,
    c: int,
    s: float,
    sigma_n: float,
    T: int,
    floor: float | None,
    samples: int = 100,
    seed: int = 0,
) -> LeakageReport:
    """Max bound over ``samples`` random c-subsets plus the prefix scenario.

    An exhaustive maximum over all subsets is infeasible; this is a lower
    bound on it, reported as the working worst case.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    best = leakage_bound(grid, CollusionScenario.prefix(c), s, sigma_n, T=T, floor=floor)
    for _ in range(samples):
        subset = tuple(sorted(rng.choice(grid.N, size=c, replace=False).tolist()))
        report = leakage_bound(grid, CollusionScenario(subset), s, sigma_n, T=T, floor=floor)
        if report.bits > best.bits:
            best = report
    return best


def calibrate_floor(
    grid: InterpolationGrid,
    scenario: CollusionScenario,
    s: float,
    sigma_n: float,
    T: int,
    target_bits: float,
    bracket: tuple[float, float] = (1e-30, 1e6),
    iterations: int = 120,
) -> float:
    """Tune the regularization floor until the bound meets ``target_bits``.

    The bound decreases monotonically in the floor, so a log-space bisection
    converges; used to anchor the all-collude pessimistic scenario at the
    entropy of the inputs before sweeping curves with the floor held fixed.
    """

    def bits_at(floor):
        return leakage_bound(grid, scenario, s, sigma_n, T=T, floor=floor).bits

    lo, hi = bracket
    bits_lo = None
    # Floors far below rounding noise of the reassembled covariance make the
    # factorization fail; walk the lower bracket up until it is computable.
    for _ in range(12):
        try:
            bits_lo = bits_at(lo)
            break
        except NumericalFailureError:
            lo *= 100.0
    if bits_lo is None:
        raise NumericalFailureError("no computable lower bracket for calibration")
    bits_hi = bits_at(hi)
    if not (bits_hi <= target_bits <= bits_lo):
        raise ValueError(
            f"target {target_bits} bits outside achievable range "
            f"[{bits_hi:.4g}, {bits_lo:.4g}] for bracket ({lo:g}, {hi:g})"
        )
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if bits_at(mid) > target_bits:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def rowwise_leakage(
    grid: InterpolationGrid,
    scenario: CollusionScenario,
    v: int,
    s: float,
    sigma_n: float,
    floor: float | None = None,
    epsilon: float = math.inf,
) -> LeakageReport:
    """Leakage bound for per-row coded-matrix encodings, averaged over rows.

    Row i is observed as q_i(z) X_i plus v mask terms q_{K+i+t}(z) q_i(z) R;
    each row gets its own c x 1 / c x v channel pair and the per-row bounds
    are averaged into bits_per_point.
    """
    if v < 1:
        raise ValueError("v must be >= 1; v = 0 means no masks and unbounded leakage")
    K = grid.K
    if grid.T != K * v:
        raise ValueError(f"grid needs T = K*v = {K * v} mask points, has {grid.T}")
    if not sigma_n > 0:
        raise ValueError(f"sigma_n must be positive, got {sigma_n}")
    weights = weight_matrix(grid.zs[list(scenario.node_indices)], grid.alphas)
    gamma = s * s * grid.T / (sigma_n * sigma_n)
    total_bits = 0.0
    floor_used = floor
    for i in range(K):
        col = weights[:, i]
        mask_block = weights[:, K + i : K + i + v] * col[:, None]
        data_cov = np.outer(col, col)
        mask_cov_raw = mask_block @ mask_block.T
        floor_val = default_floor(mask_cov_raw) if floor is None else float(floor)
        floor_used = floor_val
        mask_cov = regularize_covariance(mask_cov_raw, floor_val)
        total_bits += max(_logdet_ratio(mask_cov, data_cov, gamma) / LN2, 0.0)
    per_point = total_bits / K
    return LeakageReport(
        bits=total_bits,
        bits_per_point=per_point,
        epsilon=epsilon,
        satisfied=per_point < epsilon,
        regularization_floor=float(floor_used),
    )
