"""EPI encoding with per-line B0 phase accrual, its adjoint, and view simulation.

Rows of a k-space array are phase-encode lines ordered by frequency index
``k = row - H//2``; columns are readout samples.  Each acquired line is its own
segment with echo time ``te_first + s*esp`` (``s`` = acquisition order).

The operators are written once in torch so the training loop can
differentiate through them; numpy inputs get numpy outputs in complex128.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .geometry import RotationAngle, SpatialGrid, as_angle, make_grid, rotate_coords
from .phantom import AnalyticPhantom, B0Model, CoilSet, FieldMap, eval_phantom

DEFAULT_BASE_ESP = 0.25e-3  # s, fully sampled echo spacing


class ShapeError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ViewSpec:
    theta: RotationAngle
    R: int = 1
    line_offset: int = 0
    esp: float | None = None  # None -> R * DEFAULT_BASE_ESP
    te_first: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", as_angle(self.theta))
        if int(self.R) != self.R or self.R < 1:
            raise ConfigError(f"acceleration R must be an integer >= 1, got {self.R}")
        object.__setattr__(self, "R", int(self.R))
        if not 0 <= self.line_offset < self.R:
            raise ConfigError(f"line_offset must lie in [0, {self.R}), got {self.line_offset}")
        if self.esp is None:
            object.__setattr__(self, "esp", DEFAULT_BASE_ESP * self.R)
        if not self.esp > 0:
            raise ConfigError("echo spacing must be positive")

    def acquired_lines(self, height: int) -> np.ndarray:
        lines = np.arange(self.line_offset, height, self.R)
        if lines.size == 0:
            raise ConfigError(f"view acquires no lines at height {height}")
        return lines

    def echo_times(self, height: int) -> np.ndarray:
        n = len(self.acquired_lines(height))
        return self.te_first + np.arange(n) * self.esp


@dataclass(frozen=True, eq=False)
class EchoTimeMap:
    times: np.ndarray
    segment_masks: np.ndarray  # (S, H) bool, one selected row each


def echo_time_map(view: ViewSpec, height: int) -> EchoTimeMap:
    lines = view.acquired_lines(height)
    masks = np.zeros((len(lines), height), dtype=bool)
    masks[np.arange(len(lines)), lines] = True
    return EchoTimeMap(view.echo_times(height), masks)


def pe_trajectory(view: ViewSpec, height: int):
    """Echo times and object-frame k-space positions (cycles/FOV) of each line."""
    lines = view.acquired_lines(height)
    c, s = view.theta.cos_sin()
    k = (lines - height // 2).astype(float)
    return view.echo_times(height), np.stack([k * c, k * s], axis=1)


@dataclass(eq=False)
class KSpaceSet:
    data: list  # per view, complex (C, H, W), unsampled rows zero
    views: list
    noise_snr: float | None = None
    seed: int | None = None

    def __len__(self):
        return len(self.views)

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.data[0].shape[1:])


def _maps(coils):
    return coils.maps if isinstance(coils, CoilSet) else coils


def _field(b0):
    return b0.values if isinstance(b0, FieldMap) else b0


def _tensor(a, dtype=torch.complex128):
    if torch.is_tensor(a):
        return a
    return torch.as_tensor(np.asarray(a), dtype=dtype)


def _centered_index(n: int, device=None) -> torch.Tensor:
    return torch.arange(n, device=device) - n // 2


def _dft_last(a: torch.Tensor) -> torch.Tensor:
    """out[k] = sum_j a[j] exp(-2i pi k (j/N - 1/2)), k = -N//2 .. N - N//2 - 1."""
    n = a.shape[-1]
    k = _centered_index(n, a.device)
    spec = torch.fft.fft(a, dim=-1)[..., k % n]
    return spec * torch.exp(1j * math.pi * k.to(a.real.dtype))


def _dft_last_adjoint(a: torch.Tensor) -> torch.Tensor:
    """Conjugate transpose of :func:`_dft_last`."""
    n = a.shape[-1]
    k = _centered_index(n, a.device)
    shifted = torch.zeros_like(a)
    shifted[..., k % n] = a * torch.exp(-1j * math.pi * k.to(a.real.dtype))
    return torch.fft.ifft(shifted, dim=-1, norm="forward")


def _line_phase(height: int, lines: np.ndarray, times: np.ndarray, b0: torch.Tensor):
    real = b0.dtype
    x = (torch.arange(height, dtype=real) / height - 0.5).to(b0.device)
    k = torch.as_tensor(lines - height // 2, dtype=real, device=b0.device)
    t = torch.as_tensor(times, dtype=real, device=b0.device)
    phase = -2 * math.pi * (k[:, None, None] * x[None, :, None] + t[:, None, None] * b0[None])
    return torch.polar(torch.ones_like(phase), phase)  # (S, H, W)


def forward_view_torch(m, b0, maps, view: ViewSpec) -> torch.Tensor:
    """Differentiable single-view EPI k-space, shape ``(C, H, W)``."""
    height, width = m.shape
    lines = view.acquired_lines(height)
    enc = _line_phase(height, lines, view.echo_times(height), b0)
    # PE-direction sum per acquired line, then the readout DFT
    rows = torch.einsum("sxy,cxy->csy", enc, maps * m)
    rows = _dft_last(rows)
    out = rows.new_zeros((maps.shape[0], height, width))
    out[:, torch.as_tensor(lines)] = rows
    return out


def adjoint_view_torch(d, maps, view: ViewSpec) -> torch.Tensor:
    height = d.shape[-2]
    mask = torch.zeros(height, dtype=torch.bool, device=d.device)
    mask[torch.as_tensor(view.acquired_lines(height))] = True
    d = d * mask[:, None]
    img = _dft_last_adjoint(d)
    img = _dft_last_adjoint(img.transpose(-1, -2)).transpose(-1, -2)
    return torch.sum(torch.conj(maps) * img, dim=0)


def _check_shapes(m, b0, maps):
    if maps.ndim != 3:
        raise ShapeError(f"coil maps must be (C, H, W), got {tuple(maps.shape)}")
    if tuple(m.shape) != tuple(maps.shape[1:]) or tuple(b0.shape) != tuple(m.shape):
        raise ShapeError(f"grid mismatch: image {tuple(m.shape)}, field {tuple(b0.shape)}, "
                         f"coils {tuple(maps.shape)}")


def forward_view(m, b0, coils, view: ViewSpec):
    """EPI forward model for one view.

    For each acquired line ``s``, row ``s`` of ``FFT2(S_c * m * exp(-2i pi b0 t_s))``
    is kept; all other rows are zero.  ``b0`` is in Hz; ``None`` means zero.
    """
    maps = _maps(coils)
    as_numpy = not any(torch.is_tensor(a) for a in (m, b0, maps))
    if b0 is None:
        b0 = np.zeros(np.shape(m))
    b0 = _field(b0)
    m, maps = _tensor(m), _tensor(maps)
    b0 = _tensor(b0, dtype=m.real.dtype)
    _check_shapes(m, b0, maps)
    out = forward_view_torch(m, b0, maps, view)
    return out.numpy() if as_numpy else out


def adjoint_view(d, coils, view: ViewSpec):
    """Exact adjoint of the B0-free sampled operator ``M F S``.

    This is ``H*W`` times the conventional zero-filled coil combination
    ``sum_c conj(S_c) IFFT2(d_c)``; see :func:`zero_filled`.
    """
    maps = _maps(coils)
    as_numpy = not (torch.is_tensor(d) or torch.is_tensor(maps))
    d, maps = _tensor(d), _tensor(maps)
    if tuple(d.shape) != tuple(maps.shape):
        raise ShapeError(f"k-space {tuple(d.shape)} does not match coils {tuple(maps.shape)}")
    out = adjoint_view_torch(d, maps, view)
    return out.numpy() if as_numpy else out


def zero_filled(d, coils, view: ViewSpec):
    """Zero-filled coil-combined image ``sum_c conj(S_c) IFFT2(d_c)``."""
    height, width = np.shape(d)[-2:]
    return adjoint_view(d, coils, view) / (height * width)


def full_sampling(view: ViewSpec) -> ViewSpec:
    return ViewSpec(view.theta, 1, 0, view.esp, view.te_first)


def add_noise(kspace: np.ndarray, view: ViewSpec, snr_db: float,
              rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian noise on acquired rows, scaled to hit ``snr_db`` exactly."""
    lines = view.acquired_lines(kspace.shape[-2])
    signal = kspace[:, lines]
    noise = rng.standard_normal(signal.shape) + 1j * rng.standard_normal(signal.shape)
    noise *= np.linalg.norm(signal) / np.linalg.norm(noise) * 10 ** (-snr_db / 20)
    out = kspace.copy()
    out[:, lines] += noise
    return out


def simulate_views(phantom: AnalyticPhantom, b0, coils: CoilSet, views,
                   noise_snr: float | None = None, seed: int = 0) -> KSpaceSet:
    """Simulate multi-coil EPI k-space for each rotated view.

    Phantom and field are evaluated analytically on the rotated grid.  Coil
    maps are taken as given for every view (they live in the encoding frame).
    """
    views = list(views)
    if not views:
        raise ConfigError("at least one view is required")
    model = b0.model if isinstance(b0, FieldMap) else b0
    if not isinstance(model, B0Model):
        raise ConfigError("simulation needs an analytic B0 model")
    maps = _maps(coils)
    grid = make_grid(*maps.shape[1:])
    streams = np.random.SeedSequence(seed).spawn(len(views))
    data = []
    for view, stream in zip(views, streams):
        data.append(simulate_view(phantom, model, maps, view, grid))
        if noise_snr is not None:
            data[-1] = add_noise(data[-1], view, noise_snr, np.random.default_rng(stream))
    return KSpaceSet(data, views, noise_snr, seed)


def simulate_view(phantom: AnalyticPhantom, model: B0Model, maps, view: ViewSpec,
                  grid: SpatialGrid) -> np.ndarray:
    rotated = rotate_coords(grid, view.theta)
    return forward_view(eval_phantom(phantom, rotated), model.evaluate(rotated),
                        maps, view)
