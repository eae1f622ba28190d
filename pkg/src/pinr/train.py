"""Joint optimization of the image and field networks against multi-view EPI data.

The data term lives in the zero-filled image domain: for each view the
network image is pushed through the segmented EPI model with the network
field, mapped back with the adjoint and compared against the zero-filled
acquired data, both divided by one global scale ``rho``.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .encode import ConfigError, KSpaceSet, adjoint_view_torch, forward_view_torch, zero_filled
from .geometry import SpatialGrid, rotate_coords
from .inr import NetworkParams, as_coords
from .phantom import B0Model, CoilSet

log = logging.getLogger(__name__)

DETERMINISTIC_ENV = "PINR_DETERMINISTIC"


class DivergenceError(FloatingPointError):
    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"loss became non-finite at iteration {iteration}")


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 6000
    learning_rate: float = 3e-3
    tv_weight_init: float = 1e-5
    tv_decay_factor: float = 0.1
    tv_decay_every: int = 1000
    tv_off_after: int = 5000
    smoothl1_delta: float = 1.0
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(self.betas))
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not self.tv_off_after < self.iterations:
            raise ConfigError("tv_off_after must be smaller than iterations")
        if self.tv_decay_every < 1:
            raise ConfigError("tv_decay_every must be >= 1")


def deterministic_requested() -> bool:
    return os.environ.get(DETERMINISTIC_ENV, "") not in ("", "0")


def apply_determinism(force: bool = False):
    if force or deterministic_requested():
        torch.use_deterministic_algorithms(True)


def tv_weight(iteration: int, cfg: TrainConfig) -> float:
    if iteration >= cfg.tv_off_after:
        return 0.0
    return cfg.tv_weight_init * cfg.tv_decay_factor ** (iteration // cfg.tv_decay_every)


def tv_regularizer(values):
    """Anisotropic TV with forward differences, no wrap, divided by pixel count."""
    v = values if torch.is_tensor(values) else torch.as_tensor(np.asarray(values, dtype=float))
    total = (v[1:, :] - v[:-1, :]).abs().sum() + (v[:, 1:] - v[:, :-1]).abs().sum()
    out = total / v.numel()
    return out if torch.is_tensor(values) else float(out)


def smooth_l1(residual, delta: float):
    """Pointwise ``0.5 r^2/delta`` for ``|r| < delta``, else ``|r| - 0.5 delta``."""
    r = residual if torch.is_tensor(residual) else torch.as_tensor(np.asarray(residual, dtype=float))
    out = F.smooth_l1_loss(r, torch.zeros_like(r), reduction="none", beta=delta)
    return out if torch.is_tensor(residual) else out.numpy()


@dataclass(eq=False)
class Targets:
    images: list  # per view, complex128 (H, W), already divided by rho
    rho: float


def precompute_targets(data: KSpaceSet, coils) -> Targets:
    imgs = [zero_filled(d, coils, v) for d, v in zip(data.data, data.views)]
    rho = max(float(np.abs(im).max()) for im in imgs)
    if not rho > 0:
        raise DegenerateDataError("all acquired data are zero")
    return Targets([im / rho for im in imgs], rho)


@dataclass(eq=False)
class TrainState:
    params: NetworkParams
    optimizer: torch.optim.Optimizer
    iteration: int = 0
    history: list = field(default_factory=list)  # (data term, tv term)

    def history_array(self) -> np.ndarray:
        return np.asarray(self.history, dtype=float).reshape(-1, 2)


class Problem:
    """Precomputed, device-ready pieces of the objective for one dataset."""

    def __init__(self, targets: Targets, views, grid: SpatialGrid, coils,
                 dtype=torch.float32, true_b0: B0Model | None = None):
        cdtype = torch.complex64 if dtype == torch.float32 else torch.complex128
        self.views = list(views)
        self.grid = grid
        self.rho = targets.rho
        maps = coils.maps if isinstance(coils, CoilSet) else coils
        self.maps = torch.as_tensor(maps).to(cdtype)
        self.targets = [torch.as_tensor(t).to(cdtype) for t in targets.images]
        self.pixels = grid.height * grid.width
        # one coordinate block per distinct view angle; block 0 is the regular grid
        angles = [0.0] + sorted({v.theta.theta for v in self.views} - {0.0})
        self.block_of = {a: i for i, a in enumerate(angles)}
        self.coords = torch.cat([as_coords(rotate_coords(grid, a), dtype) for a in angles])
        self.true_b0 = None
        if true_b0 is not None:
            self.true_b0 = {a: torch.as_tensor(true_b0.evaluate(rotate_coords(grid, a)),
                                               dtype=dtype) for a in angles}

    def block(self, values: torch.Tensor, angle: float) -> torch.Tensor:
        i = self.block_of[angle]
        return values[i * self.pixels:(i + 1) * self.pixels].reshape(self.grid.shape)


def loss_terms(params: NetworkParams, problem: Problem, cfg: TrainConfig,
               iteration: int):
    """Return ``(total, data, tv)`` as differentiable scalars."""
    out = params.image(problem.coords)
    image = torch.complex(out[:, 0], out[:, 1])
    if problem.true_b0 is None:
        field = params.b0_scale * params.b0(problem.coords)[:, 0]
    residuals = []
    for view, target in zip(problem.views, problem.targets):
        angle = view.theta.theta
        m = problem.block(image, angle)
        b0 = (problem.true_b0[angle] if problem.true_b0 is not None
              else problem.block(field, angle))
        kspace = forward_view_torch(m, b0, problem.maps, view)
        pred = adjoint_view_torch(kspace, problem.maps, view) / problem.pixels
        residuals.append(torch.view_as_real(target - pred))
    data = smooth_l1(torch.stack(residuals), cfg.smoothl1_delta).mean()
    lam = tv_weight(iteration, cfg)
    if problem.true_b0 is None and lam > 0:
        tv = tv_regularizer(problem.block(field, 0.0))
        total = data + lam * tv
    else:
        tv = data.new_zeros(())
        total = data
    return total, data, tv


def loss_step(state: TrainState, problem: Problem, cfg: TrainConfig):
    """Evaluate the objective at the current iteration and backpropagate.

    Returns ``(total, data, tv, grads)`` with ``grads`` keyed by parameter name.
    """
    state.optimizer.zero_grad(set_to_none=True)
    total, data, tv = loss_terms(state.params, problem, cfg, state.iteration)
    if not torch.isfinite(total):
        raise DivergenceError(state.iteration)
    total.backward()
    grads = {n: p.grad for n, p in state.params.named_parameters() if p.grad is not None}
    return total.item(), data.item(), tv.item(), grads


def make_optimizer(params: NetworkParams, cfg: TrainConfig, train_b0: bool = True):
    nets = [params.image, params.b0] if train_b0 else [params.image]
    decay = [w for net in nets for w in net.weight_parameters()]
    rest = [p for net in nets for p in net.other_parameters()]
    return torch.optim.AdamW(
        [{"params": decay, "weight_decay": cfg.weight_decay},
         {"params": rest, "weight_decay": 0.0}],
        lr=cfg.learning_rate, betas=cfg.betas)


def fit(data: KSpaceSet, coils, grid: SpatialGrid, params: NetworkParams,
        cfg: TrainConfig, true_b0: B0Model | None = None, callback=None,
        log_every: int = 500):
    """Run ``cfg.iterations`` full-grid AdamW steps; returns ``(params, state)``.

    With ``true_b0`` the field network is bypassed and only the image network
    is trained against the known field.  A ``callback(state)`` returning True
    stops training after the current iteration.
    """
    if len(data) < 1:
        raise ConfigError("at least one view is required")
    if tuple(data.shape) != grid.shape:
        raise ConfigError(f"data grid {data.shape} does not match {grid.shape}")
    apply_determinism()
    targets = precompute_targets(data, coils)
    params.image_scale = targets.rho
    problem = Problem(targets, data.views, grid, coils, params.dtype, true_b0)
    state = TrainState(params, make_optimizer(params, cfg, train_b0=true_b0 is None))
    for it in range(cfg.iterations):
        state.iteration = it
        total, d, tv = step(state, problem, cfg)
        if log_every and (it % log_every == 0 or it == cfg.iterations - 1):
            log.info("iter %5d  data %.4e  tv %.4e  lambda %.1e", it, d, tv, tv_weight(it, cfg))
        if callback is not None and callback(state):
            log.info("stopped by callback after iteration %d", it)
            break
    state.iteration = len(state.history)
    return params, state


def step(state: TrainState, problem: Problem, cfg: TrainConfig):
    total, data, tv, _ = loss_step(state, problem, cfg)
    state.optimizer.step()
    state.history.append((data, tv))
    return total, data, tv


def infer(params: NetworkParams, grid: SpatialGrid):
    """Image (data units) and field (Hz) on a regular grid, as numpy arrays."""
    with torch.no_grad():
        coords = as_coords(grid, params.dtype)
        out = params.image(coords)
        image = torch.complex(out[:, 0], out[:, 1]).to(torch.complex128)
        field = params.b0_scale * params.b0(coords)[:, 0].to(torch.float64)
    image = params.image_scale * image.numpy().reshape(grid.shape)
    return image, field.numpy().reshape(grid.shape)
