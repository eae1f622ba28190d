"""Figure panels: truth | estimate | error rows for the image and the B0 field."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
import numpy as np  # noqa: E402

from .encode import ConfigError  # noqa: E402


def parse_roi(text_or_seq, shape):
    """``x0,y0,x1,y1`` in pixels (x = column, y = row), half-open."""
    if text_or_seq is None or len(text_or_seq) == 0:
        return None
    try:
        if isinstance(text_or_seq, str):
            vals = [int(v) for v in text_or_seq.split(",")]
        else:
            vals = [int(v) for v in text_or_seq]
    except ValueError:
        raise ConfigError(f"ROI must be four integers x0,y0,x1,y1, got {text_or_seq!r}") from None
    if len(vals) != 4:
        raise ConfigError(f"ROI must be four integers x0,y0,x1,y1, got {text_or_seq!r}")
    x0, y0, x1, y1 = vals
    h, w = shape
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise ConfigError(f"ROI {vals} is empty or outside the {h}x{w} image")
    return x0, y0, x1, y1


def _box(ax, roi):
    if roi is not None:
        x0, y0, x1, y1 = roi
        ax.add_patch(Rectangle((x0 - 0.5, y0 - 0.5), x1 - x0, y1 - y0,
                               fill=False, edgecolor="red", linewidth=1.2))


def _row(fig, axes, panels, roi):
    for ax, (title, data, kw, label) in zip(axes, panels):
        im = ax.imshow(data, **kw)
        ax.set_title(title, fontsize=10)
        ax.set_xticks([])
        ax.set_yticks([])
        _box(ax, roi)
        cb = fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        if label:
            cb.set_label(label)


def image_panel(truth, recon, path, error_max=None, roi=None, dpi=120):
    t, r = np.abs(truth), np.abs(recon)
    vmax = t.max()
    emax = error_max if error_max is not None else 0.1 * vmax
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.6))
    gray = dict(cmap="gray", vmin=0, vmax=vmax)
    _row(fig, axes, [("Ground truth", t, gray, None),
                     ("Reconstruction", r, gray, None),
                     ("|Error|", np.abs(r - t), dict(cmap="inferno", vmin=0, vmax=emax), None)],
         roi)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def b0_panel(truth, estimate, path, error_max=None, roi=None, dpi=120):
    lim = float(max(np.abs(truth).max(), np.abs(estimate).max()))
    emax = error_max if error_max is not None else 0.1 * float(np.abs(truth).max())
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.6))
    field = dict(cmap="RdBu_r", vmin=-lim, vmax=lim)
    _row(fig, axes, [("B0 truth", truth, field, "Hz"),
                     ("B0 estimate", estimate, field, "Hz"),
                     ("|Error|", np.abs(estimate - truth),
                      dict(cmap="inferno", vmin=0, vmax=emax), "Hz")],
         roi)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def roi_panel(truth, recon, b0_truth, b0_est, roi, path, dpi=120):
    x0, y0, x1, y1 = roi
    crop = (slice(y0, y1), slice(x0, x1))
    t, r = np.abs(truth)[crop], np.abs(recon)[crop]
    bt, be = b0_truth[crop], b0_est[crop]
    lim = float(max(np.abs(bt).max(), np.abs(be).max()))
    vmax = np.abs(truth).max()
    fig, axes = plt.subplots(2, 2, figsize=(7, 6.4))
    _row(fig, axes[0], [("Truth (ROI)", t, dict(cmap="gray", vmin=0, vmax=vmax), None),
                        ("Reconstruction (ROI)", r, dict(cmap="gray", vmin=0, vmax=vmax), None)],
         None)
    field = dict(cmap="RdBu_r", vmin=-lim, vmax=lim)
    _row(fig, axes[1], [("B0 truth (ROI)", bt, field, "Hz"),
                        ("B0 estimate (ROI)", be, field, "Hz")], None)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def render_all(truth_image, recon_image, truth_b0, recon_b0, outdir, prefix="pinr",
               roi=None, error_max_fraction=0.1):
    os.makedirs(outdir, exist_ok=True)
    emax = error_max_fraction * float(np.abs(truth_image).max())
    b0_emax = error_max_fraction * float(np.abs(truth_b0).max())
    files = [
        image_panel(truth_image, recon_image, os.path.join(outdir, f"{prefix}_image.png"),
                    emax, roi),
        b0_panel(truth_b0, recon_b0, os.path.join(outdir, f"{prefix}_b0.png"), b0_emax, roi),
    ]
    if roi is not None:
        files.append(roi_panel(truth_image, recon_image, truth_b0, recon_b0, roi,
                               os.path.join(outdir, f"{prefix}_roi.png")))
    return files
