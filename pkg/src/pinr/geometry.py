"""Normalized spatial grids and in-plane coordinate rotation.

Pixel ``(i, j)`` of an ``H x W`` grid sits at ``(i/H - 0.5, j/W - 0.5)``, so a
k-space index ``k`` contributes the phase ``exp(-2j*pi*k*x)`` and the discrete
encoder and the coordinate networks share one frame.  The first image axis
(``x``, rows) is the phase-encode axis of every view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InvalidDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class RotationAngle:
    """Rotation angle in degrees, normalized to ``[0, 360)``."""

    theta: float

    def __post_init__(self):
        theta = float(self.theta) % 360.0
        # tiny negative inputs round up to exactly 360
        object.__setattr__(self, "theta", 0.0 if theta >= 360.0 else theta)

    @property
    def radians(self) -> float:
        return math.radians(self.theta)

    def cos_sin(self) -> tuple[float, float]:
        # quarter turns are exact so 90/180/270 degree views are bit-clean
        quarter, rest = divmod(self.theta, 90.0)
        if rest == 0.0 and quarter < 4:
            return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(quarter)]
        rad = self.radians
        return math.cos(rad), math.sin(rad)

    def __neg__(self) -> RotationAngle:
        return RotationAngle(-self.theta)


def as_angle(angle) -> RotationAngle:
    return angle if isinstance(angle, RotationAngle) else RotationAngle(angle)


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    height: int
    width: int
    coords: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def x(self) -> np.ndarray:
        return self.coords[:, 0].reshape(self.shape)

    @property
    def y(self) -> np.ndarray:
        return self.coords[:, 1].reshape(self.shape)


def make_grid(height: int, width: int) -> SpatialGrid:
    """Regular pixel-center grid, row-major, coordinates in ``[-0.5, 0.5)``."""
    if int(height) != height or int(width) != width or height < 2 or width < 2:
        raise InvalidDimensionError(
            f"grid dimensions must be integers >= 2, got {height}x{width}")
    height, width = int(height), int(width)
    x = np.arange(height) / height - 0.5
    y = np.arange(width) / width - 0.5
    xx, yy = np.meshgrid(x, y, indexing="ij")
    coords = np.stack([xx.ravel(), yy.ravel()], axis=1)
    coords.setflags(write=False)
    return SpatialGrid(height, width, coords)


def rotation_matrix(angle) -> np.ndarray:
    c, s = as_angle(angle).cos_sin()
    return np.array([[c, -s], [s, c]])


def rotate_points(points: np.ndarray, angle) -> np.ndarray:
    """Actively rotate an ``(N, 2)`` array of points counter-clockwise."""
    c, s = as_angle(angle).cos_sin()
    points = np.asarray(points, dtype=float)
    x, y = points[..., 0], points[..., 1]
    return np.stack([x * c - y * s, x * s + y * c], axis=-1)


def rotate_coords(grid: SpatialGrid, angle) -> SpatialGrid:
    """Rotate every grid coordinate; results may leave ``[-0.5, 0.5)``."""
    coords = rotate_points(grid.coords, angle)
    coords.setflags(write=False)
    return SpatialGrid(grid.height, grid.width, coords)
