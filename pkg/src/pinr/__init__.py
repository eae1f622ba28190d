"""Joint B0 estimation and EPI reconstruction with coordinate networks."""

from .encode import ViewSpec, adjoint_view, forward_view, simulate_views, zero_filled
from .geometry import RotationAngle, make_grid, rotate_coords
from .inr import HashGridConfig, MLPConfig, init_params, query_b0, query_image
from .phantom import eval_phantom, make_b0, make_coils, shepp_logan, support_mask
from .train import TrainConfig, fit, infer

__all__ = [
    "HashGridConfig", "MLPConfig", "RotationAngle", "TrainConfig", "ViewSpec",
    "adjoint_view", "eval_phantom", "fit", "forward_view", "infer", "init_params",
    "make_b0", "make_coils", "make_grid", "query_b0", "query_image", "rotate_coords",
    "shepp_logan", "simulate_views", "support_mask", "zero_filled",
]

__version__ = "0.1.0"
