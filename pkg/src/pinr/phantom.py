"""Analytic ground truth: ellipse phantoms, smooth B0 fields and coil maps.

Everything here is evaluated in closed form at arbitrary coordinates, so a
rotated view is simulated by rotating the query points and never by
resampling a raster.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .geometry import SpatialGrid, as_angle, rotate_points

DEFAULT_MAX_HZ = 500.0


class FieldRangeError(ValueError):
    pass


class EmptyMaskError(ValueError):
    pass


class InvalidCountError(ValueError):
    pass


def _coords(where) -> np.ndarray:
    if isinstance(where, SpatialGrid):
        return where.coords
    return np.asarray(where, dtype=float).reshape(-1, 2)


def _shape(where, n):
    return where.shape if isinstance(where, SpatialGrid) else (n,)


@dataclass(frozen=True)
class Ellipse:
    center_x: float
    center_y: float
    semi_axis_a: float
    semi_axis_b: float
    tilt: float = 0.0  # degrees
    intensity: complex = 1.0

    def __post_init__(self):
        if not (self.semi_axis_a > 0 and self.semi_axis_b > 0):
            raise ValueError("ellipse semi-axes must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        c, s = as_angle(self.tilt).cos_sin()
        dx = points[:, 0] - self.center_x
        dy = points[:, 1] - self.center_y
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.semi_axis_a) ** 2 + (v / self.semi_axis_b) ** 2 <= 1.0


@dataclass(frozen=True)
class AnalyticPhantom:
    ellipses: tuple[Ellipse, ...]

    def __post_init__(self):
        object.__setattr__(self, "ellipses", tuple(self.ellipses))
        if not self.ellipses:
            raise ValueError("a phantom needs at least one ellipse")

    def to_rows(self) -> list[list[float]]:
        return [[e.center_x, e.center_y, e.semi_axis_a, e.semi_axis_b, e.tilt,
                 complex(e.intensity).real, complex(e.intensity).imag]
                for e in self.ellipses]

    @classmethod
    def from_rows(cls, rows) -> AnalyticPhantom:
        return cls(tuple(Ellipse(r[0], r[1], r[2], r[3], r[4], complex(r[5], r[6]))
                         for r in rows))


# Modified Shepp-Logan (Toft) in [-1, 1] units: x0, y0, a, b, tilt, value.
_SHEPP_LOGAN = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
]
# small imaginary parts give the ground truth a non-trivial phase
_PHASE_TWEAK = [0.0, 0.0, 0.05j, -0.05j, 0.04j, 0.0, 0.0, 0.0, 0.0, 0.0]


def shepp_logan(scale: float = 0.45, complex_valued: bool = True) -> AnalyticPhantom:
    """Modified Shepp-Logan phantom mapped into normalized image coordinates.

    The textbook ``(x0, y0)`` frame (x right, y up) is turned a quarter turn so
    that the head points towards row 0, i.e. ``x_img = -y0`` and ``y_img = x0``.
    """
    ellipses = []
    for (x0, y0, a, b, tilt, value), tweak in zip(_SHEPP_LOGAN, _PHASE_TWEAK):
        intensity = value + (tweak if complex_valued else 0.0)
        ellipses.append(Ellipse(-y0 * scale, x0 * scale, b * scale, a * scale,
                                tilt, intensity))
    return AnalyticPhantom(tuple(ellipses))


def eval_phantom(phantom: AnalyticPhantom, where) -> np.ndarray:
    """Sum of the intensities of every ellipse containing each point."""
    pts = _coords(where)
    out = np.zeros(len(pts), dtype=complex)
    for e in phantom.ellipses:
        out[e.contains(pts)] += complex(e.intensity)
    return out.reshape(_shape(where, len(pts)))


def rotate_phantom_params(phantom: AnalyticPhantom, angle) -> AnalyticPhantom:
    """Phantom whose image is the input image actively rotated by ``angle``."""
    angle = as_angle(angle)
    out = []
    for e in phantom.ellipses:
        cx, cy = rotate_points(np.array([e.center_x, e.center_y]), angle)
        out.append(Ellipse(float(cx), float(cy), e.semi_axis_a, e.semi_axis_b,
                           e.tilt + angle.theta, e.intensity))
    return AnalyticPhantom(tuple(out))


def _monomials(degree: int):
    # graded order: 1, x, y, x^2, xy, y^2, x^3, ...
    return [(d - k, k) for d in range(degree + 1) for k in range(d + 1)]


def _degree_for(n_coeffs: int) -> int:
    d = 0
    while (d + 1) * (d + 2) // 2 < n_coeffs:
        d += 1
    return d


@dataclass(frozen=True)
class GaussianBump:
    center_x: float
    center_y: float
    sigma: float
    amplitude: float  # Hz


@dataclass(frozen=True)
class B0Model:
    """Off-resonance in Hz: graded polynomial plus isotropic Gaussian bumps."""

    base_coeffs: tuple[float, ...] = ()
    bumps: tuple[GaussianBump, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "base_coeffs", tuple(float(c) for c in self.base_coeffs))
        object.__setattr__(self, "bumps", tuple(
            b if isinstance(b, GaussianBump) else GaussianBump(*b) for b in self.bumps))

    def evaluate(self, where) -> np.ndarray:
        pts = _coords(where)
        x, y = pts[:, 0], pts[:, 1]
        out = np.zeros(len(pts))
        if self.base_coeffs:
            terms = _monomials(_degree_for(len(self.base_coeffs)))
            for coeff, (px, py) in zip(self.base_coeffs, terms):
                if coeff:
                    out += coeff * x ** px * y ** py
        for b in self.bumps:
            r2 = (x - b.center_x) ** 2 + (y - b.center_y) ** 2
            out += b.amplitude * np.exp(-r2 / (2.0 * b.sigma ** 2))
        return out.reshape(_shape(where, len(pts)))

    def rotated(self, angle) -> B0Model:
        """Field actively rotated by ``angle``: ``new(p) = old(R(-angle) p)``."""
        angle = as_angle(angle)
        c, s = (-angle).cos_sin()
        coeffs = self.base_coeffs
        new = np.zeros(0)
        if coeffs:
            terms = _monomials(_degree_for(len(coeffs)))
            new = np.zeros(len(terms))
            index = {t: i for i, t in enumerate(terms)}
            # old(x', y') with x' = c x - s y, y' = s x + c y
            for coeff, (px, py) in zip(coeffs, terms):
                if not coeff:
                    continue
                for i in range(px + 1):
                    # (c x - s y)^px -> C(px,i) (c x)^(px-i) (-s y)^i
                    a = comb(px, i) * c ** (px - i) * (-s) ** i
                    for j in range(py + 1):
                        # (s x + c y)^py -> C(py,j) (s x)^(py-j) (c y)^j
                        b = comb(py, j) * s ** (py - j) * c ** j
                        new[index[(px - i + py - j, i + j)]] += coeff * a * b
        bumps = []
        for b in self.bumps:
            cx, cy = rotate_points(np.array([b.center_x, b.center_y]), angle)
            bumps.append(GaussianBump(float(cx), float(cy), b.sigma, b.amplitude))
        return B0Model(tuple(new), tuple(bumps))


@dataclass(frozen=True, eq=False)
class FieldMap:
    values: np.ndarray = field(repr=False)  # Hz
    model: B0Model | None = None


def make_b0(base_coeffs, bumps, grid: SpatialGrid,
            max_hz: float = DEFAULT_MAX_HZ) -> FieldMap:
    model = B0Model(tuple(base_coeffs), tuple(bumps))
    for b in model.bumps:
        if abs(b.amplitude) > max_hz:
            raise FieldRangeError(f"bump amplitude {b.amplitude} Hz exceeds +/-{max_hz} Hz")
        if b.sigma <= 0:
            raise ValueError("bump width must be positive")
    values = model.evaluate(grid)
    peak = np.max(np.abs(values))
    if not np.isfinite(peak) or peak > max_hz:
        raise FieldRangeError(f"field reaches {peak:.1f} Hz, limit is {max_hz} Hz")
    return FieldMap(values, model)


@dataclass(frozen=True, eq=False)
class CoilSet:
    maps: np.ndarray = field(repr=False)  # (C, H, W) complex

    @property
    def count(self) -> int:
        return self.maps.shape[0]


def coil_profiles(n_coils: int, seed: int, where, ring_radius: float = 0.7,
                  width: float = 0.4) -> np.ndarray:
    """Normalized ring-of-Gaussians coil sensitivities with linear phase ramps."""
    if int(n_coils) != n_coils or n_coils < 1:
        raise InvalidCountError(f"coil count must be >= 1, got {n_coils}")
    rng = np.random.default_rng(seed)
    pts = _coords(where)
    x, y = pts[:, 0], pts[:, 1]
    offset = rng.uniform(0, 2 * np.pi)
    angles = offset + 2 * np.pi * np.arange(n_coils) / n_coils
    slopes = rng.uniform(-1.5, 1.5, size=(n_coils, 2))  # cycles per FOV
    phase0 = rng.uniform(0, 2 * np.pi, size=n_coils)
    gain = rng.uniform(0.8, 1.2, size=n_coils)
    maps = np.empty((n_coils, len(pts)), dtype=complex)
    for c in range(n_coils):
        cx, cy = ring_radius * np.cos(angles[c]), ring_radius * np.sin(angles[c])
        mag = gain[c] * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width ** 2))
        phase = phase0[c] + 2 * np.pi * (slopes[c, 0] * x + slopes[c, 1] * y)
        maps[c] = mag * np.exp(1j * phase)
    total = np.sum(np.abs(maps) ** 2, axis=0)
    ok = total > 1e-6
    maps[:, ok] /= np.sqrt(total[ok])
    return maps.reshape((n_coils,) + _shape(where, len(pts)))


def make_coils(grid: SpatialGrid, n_coils: int, seed: int = 0) -> CoilSet:
    return CoilSet(coil_profiles(n_coils, seed, grid))


def support_mask(image: np.ndarray, rel_threshold: float = 0.05) -> np.ndarray:
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    mag = np.abs(np.asarray(image))
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        raise EmptyMaskError("image is identically zero; support is empty")
    return mag > rel_threshold * peak
