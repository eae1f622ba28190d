"""Preset acquisition schemes and the desk-scale benchmark scenario."""

from __future__ import annotations

from dataclasses import dataclass

from .encode import ConfigError, ViewSpec
from .geometry import SpatialGrid, make_grid
from .phantom import AnalyticPhantom, B0Model, CoilSet, GaussianBump, make_coils, shepp_logan

PRESETS = {
    "two-view": ((0.0, 180.0), 4),
    "three-view": ((0.0, 120.0, 240.0), 6),
}

# gentle background: offset, linear and quadratic terms (Hz)
DEFAULT_BASE_COEFFS = (5.0, 20.0, -15.0, 40.0, 10.0, -30.0)
DEFAULT_PEAK = GaussianBump(-0.12, 0.1, 0.06, 150.0)


def make_views(angles, R: int, esp: float | None = None, line_offset: int = 0):
    angles = [float(a) % 360.0 for a in angles]
    if len(set(angles)) != len(angles):
        raise ConfigError(f"duplicate view angles in {angles}")
    return [ViewSpec(a, R, line_offset, esp) for a in angles]


def preset_views(name: str, esp: float | None = None):
    try:
        angles, R = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return make_views(angles, R, esp)


def default_b0(peak_hz: float = 150.0) -> B0Model:
    bump = GaussianBump(DEFAULT_PEAK.center_x, DEFAULT_PEAK.center_y,
                        DEFAULT_PEAK.sigma, peak_hz)
    return B0Model(DEFAULT_BASE_COEFFS, (bump,) if peak_hz else ())


@dataclass(eq=False)
class Scenario:
    grid: SpatialGrid
    phantom: AnalyticPhantom
    b0: B0Model
    coils: CoilSet
    views: list


def standard_scenario(size: int = 64, views=None, n_coils: int = 8, seed: int = 0,
                      peak_hz: float = 150.0) -> Scenario:
    """64x64 Shepp-Logan, 8 coils, three views at 0/120/240 degrees with R=2."""
    grid = make_grid(size, size)
    if views is None:
        views = make_views((0.0, 120.0, 240.0), 2)
    return Scenario(grid, shepp_logan(), default_b0(peak_hz),
                    make_coils(grid, n_coils, seed), list(views))
