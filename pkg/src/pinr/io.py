"""HDF5 dataset and results containers.

Complex arrays are stored as trailing-axis ``(real, imag)`` float64 pairs.

Dataset layout::

    /truth/image            (H, W, 2)
    /truth/b0               (H, W)       Hz
    /truth/phantom          (E, 7)       cx, cy, a, b, tilt_deg, re, im
    /truth/b0_base_coeffs   (P,)         graded polynomial, Hz
    /truth/b0_bumps         (K, 4)       cx, cy, sigma, amplitude_hz
    /coils                  (C, H, W, 2)
    /kspace/view_{n}        (C, H, W, 2) attrs theta_deg, R, line_offset, esp_s, te_first_s

Results add ``/recon/{image,b0,loss_history}`` and ``/params/*``, with the
resolved run configuration in the ``config`` root attribute.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import h5py
import numpy as np
import torch

from .encode import KSpaceSet, ViewSpec
from .inr import HashGridConfig, MLPConfig, NetworkParams, init_params
from .phantom import AnalyticPhantom, B0Model, CoilSet, GaussianBump

FORMAT_VERSION = "1.0"
VIEW_ATTRS = ("theta_deg", "R", "line_offset", "esp_s", "te_first_s")


class ContainerError(OSError):
    pass


def pack_complex(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).astype(np.float64)


def unpack_complex(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[..., 0] + 1j * a[..., 1]


@dataclass(eq=False)
class Truth:
    image: np.ndarray
    b0: np.ndarray
    phantom: AnalyticPhantom
    b0_model: B0Model
    coils: CoilSet
    seed: int


def _open(path, mode):
    try:
        return h5py.File(path, mode)
    except (OSError, FileNotFoundError) as exc:
        raise ContainerError(f"cannot open {path} ({mode}): {exc}") from None


def _stamp(f: h5py.File, seed: int, noise_snr_db):
    f.attrs["format_version"] = FORMAT_VERSION
    f.attrs["seed"] = int(seed)
    f.attrs["noise_snr_db"] = np.nan if noise_snr_db is None else float(noise_snr_db)
    f.attrs["created"] = time.strftime("%Y-%m-%dT%H:%M:%S")


def write_truth(path, truth: Truth):
    with _open(path, "w") as f:
        _stamp(f, truth.seed, None)
        g = f.create_group("truth")
        g["image"] = pack_complex(truth.image)
        g["b0"] = np.asarray(truth.b0, dtype=np.float64)
        g["phantom"] = np.asarray(truth.phantom.to_rows(), dtype=np.float64)
        g["b0_base_coeffs"] = np.asarray(truth.b0_model.base_coeffs, dtype=np.float64)
        g["b0_bumps"] = np.asarray(
            [[b.center_x, b.center_y, b.sigma, b.amplitude] for b in truth.b0_model.bumps],
            dtype=np.float64).reshape(-1, 4)
        f["coils"] = pack_complex(truth.coils.maps)


def read_truth(path) -> Truth:
    with _open(path, "r") as f:
        _check_version(f, path)
        if "truth" not in f or "coils" not in f:
            raise ContainerError(f"{path} has no truth/coils groups")
        g = f["truth"]
        model = B0Model(tuple(g["b0_base_coeffs"][()]),
                        tuple(GaussianBump(*row) for row in g["b0_bumps"][()]))
        return Truth(unpack_complex(g["image"][()]), g["b0"][()],
                     AnalyticPhantom.from_rows(g["phantom"][()]), model,
                     CoilSet(unpack_complex(f["coils"][()])), int(f.attrs["seed"]))


def _check_version(f, path):
    if "format_version" not in f.attrs:
        raise ContainerError(f"{path} is not a pinr container (no format_version)")


def write_kspace(path, data: KSpaceSet):
    """Replace the k-space group of an existing truth file."""
    with _open(path, "a") as f:
        _check_version(f, path)
        if "kspace" in f:
            del f["kspace"]
        g = f.create_group("kspace")
        for n, (d, view) in enumerate(zip(data.data, data.views)):
            ds = g.create_dataset(f"view_{n}", data=pack_complex(d))
            ds.attrs["theta_deg"] = float(view.theta.theta)
            ds.attrs["R"] = int(view.R)
            ds.attrs["line_offset"] = int(view.line_offset)
            ds.attrs["esp_s"] = float(view.esp)
            ds.attrs["te_first_s"] = float(view.te_first)
        f.attrs["noise_snr_db"] = np.nan if data.noise_snr is None else float(data.noise_snr)
        if data.seed is not None:
            f.attrs["kspace_seed"] = int(data.seed)


def read_kspace(path) -> KSpaceSet:
    with _open(path, "r") as f:
        _check_version(f, path)
        if "kspace" not in f or not len(f["kspace"]):
            raise ContainerError(f"{path} contains no k-space views")
        g = f["kspace"]
        names = sorted(g, key=lambda s: int(s.split("_")[1]))
        data, views = [], []
        for name in names:
            ds = g[name]
            missing = [a for a in VIEW_ATTRS if a not in ds.attrs]
            if missing:
                raise ContainerError(f"{name} lacks attributes {missing}")
            views.append(ViewSpec(float(ds.attrs["theta_deg"]), int(ds.attrs["R"]),
                                  int(ds.attrs["line_offset"]), float(ds.attrs["esp_s"]),
                                  float(ds.attrs["te_first_s"])))
            data.append(unpack_complex(ds[()]))
        snr = float(f.attrs.get("noise_snr_db", np.nan))
        seed = f.attrs.get("kspace_seed")
        return KSpaceSet(data, views, None if np.isnan(snr) else snr,
                         None if seed is None else int(seed))


def _net_meta(params: NetworkParams) -> dict:
    def cfgs(net):
        return {"grid": net.grid_cfg.__dict__, "mlp": net.mlp_cfg.__dict__}
    return {"image": cfgs(params.image), "b0": cfgs(params.b0),
            "b0_scale": params.b0_scale, "image_scale": params.image_scale,
            "dtype": str(params.dtype).replace("torch.", "")}


def write_results(path, image, b0, history, params: NetworkParams, config_text: str,
                  seed: int = 0):
    with _open(path, "w") as f:
        _stamp(f, seed, None)
        f.attrs["config"] = config_text
        g = f.create_group("recon")
        g["image"] = pack_complex(image)
        g["b0"] = np.asarray(b0, dtype=np.float64)
        g["loss_history"] = np.asarray(history, dtype=np.float64).reshape(-1, 2)
        p = f.create_group("params")
        p.attrs["meta"] = json.dumps(_net_meta(params))
        for name, tensor in params.state_dict().items():
            p[name] = tensor.detach().cpu().numpy()


@dataclass(eq=False)
class Results:
    image: np.ndarray
    b0: np.ndarray
    loss_history: np.ndarray
    config_text: str
    params: NetworkParams | None = None


def read_results(path, with_params: bool = False) -> Results:
    with _open(path, "r") as f:
        _check_version(f, path)
        if "recon" not in f:
            raise ContainerError(f"{path} has no recon group")
        g = f["recon"]
        res = Results(unpack_complex(g["image"][()]), g["b0"][()], g["loss_history"][()],
                      str(f.attrs.get("config", "")))
        if with_params:
            res.params = _read_params(f["params"])
        return res


def _read_params(g) -> NetworkParams:
    meta = json.loads(g.attrs["meta"])
    dtype = getattr(torch, meta["dtype"])

    def cfgs(m):
        return HashGridConfig(**m["grid"]), MLPConfig(**m["mlp"])

    params = init_params(cfgs(meta["image"]), cfgs(meta["b0"]), 0, meta["b0_scale"], dtype)
    params.image_scale = meta["image_scale"]
    state = {name: torch.as_tensor(g[name][()]) for name in params.state_dict()}
    params.load_state_dict(state)
    return params


def write_loss_text(path, history):
    np.savetxt(path, np.asarray(history, dtype=float).reshape(-1, 2),
               header="data_term tv_term", fmt="%.10e")
