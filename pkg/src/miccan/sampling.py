"""Variable-density Cartesian undersampling masks and acquisition simulation.

Masks sample whole rows (phase-encode lines) of k-space along the first
axis. A configurable block of center rows is always kept, and the remaining
rows are drawn without replacement with probability proportional to a
zero-mean Gaussian profile over the row's signed distance from the center
row. For a fixed spec the mask is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSpecError, InvalidConfigError, InvalidInputError
from .fourier import ComplexImage, KSpaceData, forward_undersampled, ifft2c

__all__ = ["MaskSpec", "SamplingMask", "generate_mask", "simulate_acquisition", "zero_fill"]


@dataclass(frozen=True)
class MaskSpec:
    """Parameters describing a Cartesian row-sampling pattern.

    rate: fraction of rows to sample, in (0, 1].
    center_lines: number of center rows that are always kept.
    seed: PRNG seed; identical specs produce byte-identical masks.
    sigma_fraction: Gaussian std of the density profile, as a fraction of H.
    """

    rate: float
    center_lines: int = 8
    seed: int = 0
    sigma_fraction: float = 0.15

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise InvalidConfigError(f"rate must be in (0, 1], got {self.rate}")
        if self.center_lines < 0:
            raise InvalidConfigError(f"center_lines must be >= 0, got {self.center_lines}")
        if self.sigma_fraction <= 0:
            raise InvalidConfigError(f"sigma_fraction must be > 0, got {self.sigma_fraction}")
        if self.seed < 0:
            raise InvalidConfigError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class SamplingMask:
    """Binary H x W mask, 1 at sampled positions; whole rows are sampled."""

    grid: np.ndarray
    rows_sampled: tuple[int, ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        grid = np.asarray(self.grid)
        if grid.ndim != 2 or grid.size == 0:
            raise InvalidInputError(f"mask grid must be 2-D, got shape {grid.shape}")
        grid = (grid != 0).astype(np.uint8)
        row_any = grid.any(axis=1)
        row_all = grid.all(axis=1)
        if not np.array_equal(row_any, row_all):
            raise InvalidInputError("mask is not Cartesian: rows must be all-0 or all-1")
        rows = tuple(int(i) for i in np.flatnonzero(row_any))
        if self.rows_sampled is not None and tuple(self.rows_sampled) != rows:
            raise InvalidInputError("rows_sampled does not match grid contents")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "rows_sampled", rows)

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    @classmethod
    def from_rows(cls, rows, height: int, width: int) -> "SamplingMask":
        grid = np.zeros((height, width), dtype=np.uint8)
        grid[sorted(int(r) for r in rows), :] = 1
        return cls(grid)


def _center_rows(height: int, center_lines: int) -> range:
    start = height // 2 - center_lines // 2
    return range(start, start + center_lines)


def generate_mask(spec: MaskSpec, height: int, width: int) -> SamplingMask:
    """Draw a Cartesian variable-density mask for an H x W grid.

    Exactly ``round(rate * H)`` rows are sampled. The ``center_lines`` rows
    around ``H // 2`` are always included; the rest are drawn sequentially
    without replacement, weighted by a zero-mean Gaussian pdf of the signed
    row offset from the center row (std ``sigma_fraction * H``).
    """
    if height <= 0 or width <= 0:
        raise InvalidInputError(f"mask dimensions must be positive, got {height}x{width}")
    n_rows = int(round(spec.rate * height))
    if n_rows < spec.center_lines:
        raise InfeasibleSpecError(
            f"round(rate * H) = {n_rows} is smaller than center_lines = {spec.center_lines}"
        )
    center = _center_rows(height, spec.center_lines)
    if center and (center.start < 0 or center.stop > height):
        raise InfeasibleSpecError(
            f"center block of {spec.center_lines} rows does not fit in H = {height}"
        )
    rows = set(center)

    n_extra = n_rows - len(rows)
    if n_extra > 0:
        candidates = np.array([i for i in range(height) if i not in rows], dtype=np.intp)
        sigma = spec.sigma_fraction * height
        offsets = candidates - height // 2
        weights = np.exp(-0.5 * (offsets / sigma) ** 2)
        rng = np.random.default_rng(spec.seed)
        for _ in range(n_extra):
            p = weights / weights.sum()
            pick = rng.choice(len(candidates), p=p)
            rows.add(int(candidates[pick]))
            candidates = np.delete(candidates, pick)
            weights = np.delete(weights, pick)

    return SamplingMask.from_rows(rows, height, width)


def simulate_acquisition(ground_truth: ComplexImage, mask: SamplingMask) -> KSpaceData:
    """Simulate an undersampled acquisition: the measurement y = F_u(x)."""
    if mask.shape != ground_truth.shape:
        raise InvalidInputError(
            f"mask shape {mask.shape} does not match image shape {ground_truth.shape}"
        )
    return forward_undersampled(ground_truth, mask)


def zero_fill(y: KSpaceData) -> ComplexImage:
    """Zero-filled reconstruction: inverse transform of the raw measurement."""
    return ifft2c(y)
