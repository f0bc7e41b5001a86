"""Centered, orthonormal 2-D Fourier transforms and the undersampled forward operator.

Conventions used everywhere in this package:

* k-space is *centered*: the DC component sits at index ``(H // 2, W // 2)``.
* Transforms are *orthonormal* (scaled by ``1 / sqrt(H * W)``), so energy is
  preserved and loss magnitudes do not depend on resolution.
* Complex images are carried as two real planes so that the reconstruction
  network (which consumes real channels) and the Fourier operators share one
  representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

__all__ = ["ComplexImage", "KSpaceData", "fft2c", "ifft2c", "forward_undersampled"]


def _as_finite_2d(arr, name: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2 or out.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return out


@dataclass(frozen=True)
class ComplexImage:
    """An H x W complex-valued image stored as two real planes."""

    real_plane: np.ndarray
    imag_plane: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        real = _as_finite_2d(self.real_plane, "real_plane")
        imag = (
            np.zeros_like(real)
            if self.imag_plane is None
            else _as_finite_2d(self.imag_plane, "imag_plane")
        )
        if real.shape != imag.shape:
            raise InvalidInputError(
                f"real/imag plane shapes differ: {real.shape} vs {imag.shape}"
            )
        object.__setattr__(self, "real_plane", real)
        object.__setattr__(self, "imag_plane", imag)

    @property
    def height(self) -> int:
        return self.real_plane.shape[0]

    @property
    def width(self) -> int:
        return self.real_plane.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.real_plane.shape

    @classmethod
    def from_complex(cls, values) -> "ComplexImage":
        values = np.asarray(values)
        return cls(values.real.astype(np.float64), values.imag.astype(np.float64))

    def to_complex(self) -> np.ndarray:
        return self.real_plane + 1j * self.imag_plane

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.real_plane, self.imag_plane)


@dataclass(frozen=True)
class KSpaceData:
    """An H x W complex array in the centered Fourier domain.

    The DC component lives at index ``(H // 2, W // 2)``.
    """

    values: np.ndarray = field()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2 or values.size == 0:
            raise InvalidInputError(f"k-space must be a non-empty 2-D array, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("k-space contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def fft2c(image: ComplexImage) -> KSpaceData:
    """Centered orthonormal 2-D DFT of an image.

    Parseval holds exactly: ``norm(fft2c(x)) == norm(x)`` up to float error.
    """
    arr = image.to_complex()
    k = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(arr), norm="ortho"))
    return KSpaceData(k)


def ifft2c(kspace: KSpaceData) -> ComplexImage:
    """Exact inverse of :func:`fft2c`."""
    arr = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(kspace.values), norm="ortho"))
    return ComplexImage.from_complex(arr)


def forward_undersampled(image: ComplexImage, mask) -> KSpaceData:
    """Undersampled forward operator: elementwise mask times ``fft2c(image)``.

    Unsampled k-space positions are exactly zero in the result.
    """
    grid = np.asarray(mask.grid)
    if grid.shape != image.shape:
        raise InvalidInputError(
            f"mask shape {grid.shape} does not match image shape {image.shape}"
        )
    k = fft2c(image)
    return KSpaceData(k.values * grid.astype(np.float64))
