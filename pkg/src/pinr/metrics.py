"""Image and field error metrics (NRMSE, PSNR, SSIM, mean absolute B0 error)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from skimage.metrics import structural_similarity

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


class UndefinedMetricError(ValueError):
    pass


class MetricSizeError(ValueError):
    pass


def _pair(est, ref):
    est, ref = np.asarray(est, dtype=float), np.asarray(ref, dtype=float)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")
    return est, ref


def nrmse(est, ref) -> float:
    est, ref = _pair(est, ref)
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise UndefinedMetricError("NRMSE is undefined for an all-zero reference")
    return float(np.linalg.norm(est - ref) / norm)


def psnr(est, ref) -> float:
    """Peak SNR in dB with the reference maximum as peak; ``inf`` if identical."""
    est, ref = _pair(est, ref)
    rmse = math.sqrt(np.mean((est - ref) ** 2))
    if rmse == 0:
        return math.inf
    return float(20 * math.log10(ref.max() / rmse))


def ssim_map(est, ref) -> np.ndarray:
    est, ref = _pair(est, ref)
    if est.ndim != 2 or min(est.shape) < SSIM_WINDOW:
        raise MetricSizeError(f"SSIM needs a 2D image of at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    data_range = float(ref.max() - ref.min()) or 1.0
    _, smap = structural_similarity(
        est, ref, data_range=data_range, gaussian_weights=True, sigma=SSIM_SIGMA,
        use_sample_covariance=False, K1=SSIM_K1, K2=SSIM_K2, full=True)
    return smap


def ssim(est, ref, mask=None) -> float:
    smap = ssim_map(est, ref)
    return float(smap[mask].mean() if mask is not None else smap.mean())


def b0_mae(est, ref, mask=None) -> float:
    """Mean absolute field difference in Hz over ``mask`` (all pixels if None)."""
    est, ref = _pair(est, ref)
    if mask is None:
        mask = np.ones(est.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise UndefinedMetricError("B0 error is undefined on an empty mask")
    return float(np.mean(np.abs(est - ref)[mask]))


@dataclass
class MetricReport:
    nrmse: float
    psnr: float
    ssim: float
    b0_mae: float
    mask_pixel_count: int
    unmasked: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        keys = (("nrmse", "nrmse"), ("psnr_db", "psnr"), ("ssim", "ssim"),
                ("b0_mae_hz", "b0_mae"))
        out = {key: {"masked": getattr(self, attr), "unmasked": self.unmasked[attr]}
               for key, attr in keys}
        out["mask_pixels"] = int(self.mask_pixel_count)
        out["scenario"] = dict(self.scenario)
        return out

    def summary(self) -> str:
        return (f"NRMSE {self.nrmse:.4f}  PSNR {self.psnr:.2f} dB  SSIM {self.ssim:.4f}  "
                f"B0 {self.b0_mae:.3f} Hz  ({self.mask_pixel_count} px)")


def evaluate(image, ref_image, b0, ref_b0, mask, scenario=None) -> MetricReport:
    """Magnitude-image and field metrics, masked (headline) and whole-image."""
    est, ref = np.abs(image), np.abs(ref_image)
    mask = np.asarray(mask, dtype=bool)
    unmasked = {"nrmse": nrmse(est, ref), "psnr": psnr(est, ref),
                "ssim": ssim(est, ref), "b0_mae": b0_mae(b0, ref_b0)}
    return MetricReport(
        nrmse=nrmse(est[mask], ref[mask]), psnr=psnr(est[mask], ref[mask]),
        ssim=ssim(est, ref, mask), b0_mae=b0_mae(b0, ref_b0, mask),
        mask_pixel_count=int(mask.sum()), unmasked=unmasked, scenario=scenario or {})

