"""Chebyshev point families anchoring all encoding, decoding, and leakage math."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridCollisionError, InvalidShiftError

# Points closer than this are treated as colliding. A collision is a hard
# construction error, never a silent perturbation: perturbed grids would break
# the exact-recovery identities that the decoder relies on.
COLLISION_GUARD = 1e-12

# Keeps mask points disjoint from [-1, 1], so mask basis weights are never
# indicators on the evaluation range.
DEFAULT_MASK_SHIFT = 10.0


def chebyshev_first_kind(count: int) -> np.ndarray:
    """Chebyshev points of the first kind, cos((2j+1)*pi/(2*count)), decreasing.

    The second half mirrors the negated first half, so the family is exactly
    antisymmetric about 0 (plain cosine evaluation drifts by an ulp across the
    midpoint) and an odd ``count`` contains an exact 0.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    j = np.arange(count // 2)
    head = np.cos((2 * j + 1) * np.pi / (2 * count))
    points = np.empty(count)
    points[: count // 2] = head
    points[count - count // 2 :] = -head[::-1]
    if count % 2:
        points[count // 2] = 0.0
    return points


def chebyshev_second_kind(count: int) -> np.ndarray:
    """Chebyshev points of the second kind, cos(j*pi/(count-1)), from 1 to -1."""
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    j = np.arange(count // 2)
    head = np.cos(j * np.pi / (count - 1))
    points = np.empty(count)
    points[: count // 2] = head
    points[count - count // 2 :] = -head[::-1]
    if count % 2:
        points[count // 2] = 0.0
    return points


def shifted_first_kind(count: int, shift: float) -> np.ndarray:
    """First-kind points translated by ``shift``; anchors for the mask terms."""
    return shift + chebyshev_first_kind(count)


@dataclass(frozen=True, eq=False)
class InterpolationGrid:
    """The three validated point families used throughout the pipeline.

    ``data_points`` (K, first kind) carry the data rows, ``mask_points``
    (T, shifted first kind) carry the privacy masks, and ``eval_points``
    (N, second kind) are where workers evaluate the encoding.
    """

    data_points: np.ndarray
    mask_points: np.ndarray
    eval_points: np.ndarray
    mask_shift: float

    @property
    def K(self) -> int:
        return self.data_points.size

    @property
    def T(self) -> int:
        return self.mask_points.size

    @property
    def N(self) -> int:
        return self.eval_points.size

    @property
    def alphas(self) -> np.ndarray:
        """All K + T interpolation points, data first."""
        return np.concatenate([self.data_points, self.mask_points])

    @property
    def zs(self) -> np.ndarray:
        return self.eval_points


def build_grid(K: int, T: int, N: int, mask_shift: float = DEFAULT_MASK_SHIFT) -> InterpolationGrid:
    """Compose and validate a grid with K data, T mask, and N evaluation points.

    Raises
    ------
    InvalidShiftError
        If T > 0 and |mask_shift| <= 2, which would let mask points touch the
        data interval [-1, 1].
    GridCollisionError
        If any evaluation point coincides with an interpolation point (within
        COLLISION_GUARD). A coinciding share would reveal a raw data row, and
        certain parities force this (e.g. odd K and odd N both contain 0);
        callers must change K, the parity of N, or the shift.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if T > 0 and abs(mask_shift) <= 2.0:
        raise InvalidShiftError(
            f"|mask_shift| must exceed 2 so mask points avoid [-1, 1], got {mask_shift}"
        )
    data = chebyshev_first_kind(K)
    masks = shifted_first_kind(T, mask_shift) if T > 0 else np.empty(0)
    zs = chebyshev_second_kind(N)
    alphas = np.concatenate([data, masks])
    gaps = np.abs(zs[:, None] - alphas[None, :])
    hits = np.argwhere(gaps < COLLISION_GUARD)
    if hits.size:
        j, i = hits[0]
        raise GridCollisionError(
            f"evaluation point z[{j}]={zs[j]!r} collides with interpolation point "
            f"alpha[{i}]={alphas[i]!r}"
        )
    return InterpolationGrid(data, masks, zs, float(mask_shift))
