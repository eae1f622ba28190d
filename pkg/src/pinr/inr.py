"""Coordinate networks: 2D multiresolution hash encoding followed by an MLP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .geometry import SpatialGrid

HASH_PRIMES = (1, 2654435761)


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class HashGridConfig:
    levels: int = 16
    features_per_level: int = 2
    log2_table_size: int = 20
    base_resolution: int = 16
    per_level_scale: float = 1.19

    @property
    def resolutions(self) -> list[int]:
        return [int(math.floor(self.base_resolution * self.per_level_scale ** l))
                for l in range(self.levels)]

    @property
    def output_dim(self) -> int:
        return self.levels * self.features_per_level

    def is_dense(self, level: int) -> bool:
        n = self.resolutions[level] + 1
        return n * n <= 2 ** self.log2_table_size

    def table_sizes(self) -> list[int]:
        return [(n + 1) ** 2 if self.is_dense(l) else 2 ** self.log2_table_size
                for l, n in enumerate(self.resolutions)]


@dataclass(frozen=True)
class MLPConfig:
    out_channels: int = 2
    hidden_layers: int = 2
    hidden_width: int = 256

    def __post_init__(self):
        if self.out_channels not in (1, 2):
            raise ValueError("out_channels must be 1 (field) or 2 (complex image)")


def _corner_index(i, j, resolution: int, dense: bool, log2_size: int):
    if dense:
        return i * (resolution + 1) + j
    return ((i * HASH_PRIMES[0]) ^ (j * HASH_PRIMES[1])) & ((1 << log2_size) - 1)


def hash_encode(coords: torch.Tensor, cfg: HashGridConfig, tables) -> torch.Tensor:
    """Bilinearly interpolated multiresolution features, shape ``(N, L*F)``.

    Coordinates are shifted from ``[-0.5, 0.5)`` to the unit square and clamped,
    so rotated points outside the field of view take boundary values.
    """
    unit = torch.clamp(coords + 0.5, 0.0, 1.0)
    feats = []
    for level, (res, table) in enumerate(zip(cfg.resolutions, tables)):
        dense = cfg.is_dense(level)
        pos = unit * res
        cell = torch.clamp(torch.floor(pos), max=res - 1).long()
        frac = (pos - cell).to(table.dtype)
        i0, j0 = cell[:, 0], cell[:, 1]
        fx, fy = frac[:, 0:1], frac[:, 1:2]
        out = 0
        for di, wx in ((0, 1 - fx), (1, fx)):
            for dj, wy in ((0, 1 - fy), (1, fy)):
                idx = _corner_index(i0 + di, j0 + dj, res, dense, cfg.log2_table_size)
                out = out + wx * wy * table[idx]
        feats.append(out)
    return torch.cat(feats, dim=1)


class CoordinateNetwork(nn.Module):
    """Hash-grid encoded MLP mapping ``(x, y)`` to ``out_channels`` reals."""

    def __init__(self, grid_cfg: HashGridConfig, mlp_cfg: MLPConfig,
                 generator: torch.Generator, dtype=torch.float32):
        super().__init__()
        self.grid_cfg = grid_cfg
        self.mlp_cfg = mlp_cfg
        self.tables = nn.ParameterList([
            nn.Parameter((torch.rand(size, grid_cfg.features_per_level,
                                     generator=generator, dtype=torch.float64) * 2 - 1)
                         .mul_(1e-4).to(dtype))
            for size in grid_cfg.table_sizes()])
        widths = ([grid_cfg.output_dim] + [mlp_cfg.hidden_width] * mlp_cfg.hidden_layers
                  + [mlp_cfg.out_channels])
        self.layers = nn.ModuleList()
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            layer = nn.Linear(fan_in, fan_out, dtype=dtype)
            bound = math.sqrt(6.0 / fan_in)
            with torch.no_grad():
                layer.weight.copy_((torch.rand(fan_out, fan_in, generator=generator,
                                               dtype=torch.float64) * 2 - 1) * bound)
                layer.bias.zero_()
            self.layers.append(layer)

    def forward(self, coords: torch.Tensor) -> torch.Tensor:
        h = hash_encode(coords, self.grid_cfg, self.tables)
        for layer in self.layers[:-1]:
            h = torch.relu(layer(h))
        return self.layers[-1](h)

    def weight_parameters(self):
        return [layer.weight for layer in self.layers]

    def other_parameters(self):
        return list(self.tables) + [layer.bias for layer in self.layers]


class NetworkParams(nn.Module):
    """Image network ``f`` (re, im) and field network ``g`` (Hz / b0_scale)."""

    def __init__(self, image: CoordinateNetwork, b0: CoordinateNetwork,
                 b0_scale: float = 100.0, image_scale: float = 1.0):
        super().__init__()
        self.image = image
        self.b0 = b0
        self.b0_scale = float(b0_scale)
        # multiplies f to give the image in data units; set from the targets
        self.image_scale = float(image_scale)

    @property
    def dtype(self):
        return self.image.tables[0].dtype

    def check_finite(self):
        for name, p in self.named_parameters():
            if not torch.isfinite(p).all():
                raise NumericError(f"non-finite values in parameter {name}")


def init_params(image_cfg: tuple[HashGridConfig, MLPConfig],
                b0_cfg: tuple[HashGridConfig, MLPConfig], seed: int = 0,
                b0_scale: float = 100.0, dtype=torch.float32) -> NetworkParams:
    gen = torch.Generator().manual_seed(int(seed))
    image = CoordinateNetwork(*image_cfg, generator=gen, dtype=dtype)
    b0 = CoordinateNetwork(*b0_cfg, generator=gen, dtype=dtype)
    return NetworkParams(image, b0, b0_scale)


def default_configs(levels=16, hidden_width=256, hidden_layers=2, log2_table_size=20,
                    base_resolution=16, per_level_scale=1.19, features_per_level=2):
    grid = HashGridConfig(levels, features_per_level, log2_table_size,
                          base_resolution, per_level_scale)
    return ((grid, MLPConfig(2, hidden_layers, hidden_width)),
            (grid, MLPConfig(1, hidden_layers, hidden_width)))


def as_coords(coords, dtype=torch.float32) -> torch.Tensor:
    if isinstance(coords, SpatialGrid):
        coords = coords.coords
    if torch.is_tensor(coords):
        return coords.to(dtype)
    return torch.as_tensor(np.array(coords, dtype=float).reshape(-1, 2), dtype=dtype)


def query_image(coords, params: NetworkParams, check: bool = True) -> torch.Tensor:
    """Complex image values ``re + i*im`` at each coordinate (network units)."""
    if check:
        params.check_finite()
    out = params.image(as_coords(coords, params.dtype))
    return torch.complex(out[:, 0], out[:, 1])


def query_b0(coords, params: NetworkParams, check: bool = True) -> torch.Tensor:
    """Off-resonance in Hz at each coordinate."""
    if check:
        params.check_finite()
    return params.b0_scale * params.b0(as_coords(coords, params.dtype))[:, 0]
