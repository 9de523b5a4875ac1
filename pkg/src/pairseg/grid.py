"""Measurement lattice: an n-by-n grid of cued locations over a square image.

Cells are indexed row-major (``flat = row * n + col``). The centered lattice
coordinates used by smoothing kernels run over ``{-(n-1)/2, ..., (n-1)/2}``
for odd n and ``{-n/2, ..., n/2-1}`` for even n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation


def lattice_coords(n: int) -> np.ndarray:
    """Centered 1-d lattice coordinates: odd n -> symmetric, even n -> half-open."""
    if n % 2:
        half = (n - 1) // 2
        return np.arange(-half, half + 1, dtype=np.float64)
    half = n // 2
    return np.arange(-half, half, dtype=np.float64)


@dataclass(frozen=True)
class GridSpec:
    """Square measurement grid and its mapping onto image pixels.

    n: grid side length in cells (n >= 3).
    image_px: image side length in pixels; must be divisible by n so that
        cells map to equal, nonempty pixel squares partitioning the image.
    centering: lattice convention, "odd" or "even"; must match the parity
        of n (it is derived when omitted).
    """

    n: int
    image_px: int
    centering: str = field(default="")

    def __post_init__(self):
        if self.n < 3:
            raise ContractViolation(f"grid side must be >= 3, got n={self.n}")
        if self.image_px < self.n:
            raise ContractViolation(
                f"image_px={self.image_px} smaller than grid n={self.n}"
            )
        if self.image_px % self.n != 0:
            raise ContractViolation(
                f"image_px={self.image_px} is not divisible by n={self.n}; "
                "cells must map to equal pixel squares"
            )
        expected = "odd" if self.n % 2 else "even"
        if self.centering == "":
            object.__setattr__(self, "centering", expected)
        elif self.centering != expected:
            raise ContractViolation(
                f"centering={self.centering!r} inconsistent with n={self.n} "
                f"(expected {expected!r})"
            )

    @property
    def n_cells(self) -> int:
        return self.n * self.n

    @property
    def cell_px(self) -> int:
        return self.image_px // self.n

    def lattice_coords(self) -> np.ndarray:
        """Centered 1-d lattice coordinates, shape (n,)."""
        return lattice_coords(self.n)

    def lattice_sqdist(self) -> np.ndarray:
        """Squared distance ``|i|^2`` of every lattice point, shape (n, n)."""
        c = self.lattice_coords()
        return c[:, None] ** 2 + c[None, :] ** 2

    def flat_index(self, col: int, row: int) -> int:
        return row * self.n + col

    def cell_coords(self, flat: int) -> tuple[int, int]:
        """(col, row) of a flat cell index."""
        return flat % self.n, flat // self.n

    def in_range(self, flat: int) -> bool:
        return 0 <= flat < self.n_cells

    def cell_center_px(self, col: int, row: int) -> tuple[float, float]:
        """Pixel-space (x, y) center of a cell."""
        s = self.cell_px
        return (col + 0.5) * s, (row + 0.5) * s

    def cell_slices(self, col: int, row: int) -> tuple[slice, slice]:
        """(row slice, col slice) of the cell's pixel region."""
        s = self.cell_px
        return slice(row * s, (row + 1) * s), slice(col * s, (col + 1) * s)

    def all_centers_px(self) -> np.ndarray:
        """(n*n, 2) array of (x, y) centers, row-major cell order."""
        s = self.cell_px
        cols, rows = np.meshgrid(np.arange(self.n), np.arange(self.n))
        xs = (cols.ravel() + 0.5) * s
        ys = (rows.ravel() + 0.5) * s
        return np.stack([xs, ys], axis=1)
