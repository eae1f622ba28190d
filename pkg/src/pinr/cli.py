"""Command-line pipeline: phantom -> simulate -> reconstruct -> evaluate -> plot.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import io
from .config import RunConfig
from .encode import ConfigError, ShapeError, simulate_views
from .geometry import make_grid
from .inr import NumericError, init_params
from .metrics import evaluate as evaluate_metrics
from .phantom import GaussianBump, eval_phantom, make_b0, make_coils, shepp_logan, support_mask
from .plotting import parse_roi, render_all
from .scenarios import make_views, preset_views
from .train import DivergenceError, fit, infer

log = logging.getLogger("pinr")

EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 2, 3, 4


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    if str(path).endswith((".h5", ".hdf5")):
        text = io.read_results(path).config_text
        if not text:
            raise ConfigError(f"{path} carries no embedded config")
        return RunConfig.loads(text)
    try:
        return RunConfig.load(path)
    except OSError as exc:
        raise io.ContainerError(f"cannot read config {path}: {exc}") from None


def cmd_phantom(args):
    cfg = _load_config(args.config)
    ph = cfg.phantom
    for key in ("size", "coils", "seed", "b0_peak_hz"):
        value = getattr(args, key)
        if value is not None:
            setattr(ph, key, value)
    grid = make_grid(ph.size, ph.size)
    bumps = [GaussianBump(ph.peak_center[0], ph.peak_center[1], ph.peak_sigma, ph.b0_peak_hz)]
    field = make_b0(ph.b0_base_coeffs, bumps if ph.b0_peak_hz else [], grid, ph.max_hz)
    phantom = shepp_logan()
    coils = make_coils(grid, ph.coils, ph.seed)
    truth = io.Truth(eval_phantom(phantom, grid), field.values, phantom, field.model,
                     coils, ph.seed)
    io.write_truth(args.out, truth)
    print(f"wrote {args.out}: grid {ph.size}x{ph.size}, B0 range "
          f"[{field.values.min():.1f}, {field.values.max():.1f}] Hz, {coils.count} coils")


def cmd_simulate(args):
    cfg = _load_config(args.config)
    truth = io.read_truth(args.data)
    if args.preset:
        views = preset_views(args.preset, args.esp)
    elif args.views:
        try:
            angles = [float(a) for a in args.views.split(",")]
        except ValueError:
            raise ConfigError(f"--views must be comma-separated degrees, got {args.views!r}") from None
        views = make_views(angles, args.R or 1, args.esp, args.line_offset)
    else:
        views = cfg.build_views()
    snr = args.noise_snr if args.noise_snr is not None else cfg.encode.noise_snr_db
    seed = args.seed if args.seed is not None else cfg.encode.seed
    data = simulate_views(truth.phantom, truth.b0_model, truth.coils, views, snr, seed)
    io.write_kspace(args.data, data)
    desc = ", ".join(f"{v.theta.theta:g} deg" for v in views)
    print(f"appended {len(views)} views to {args.data}: [{desc}], R={views[0].R}, "
          f"esp={views[0].esp * 1e3:.3f} ms")


def cmd_reconstruct(args):
    cfg = _load_config(args.config)
    if args.iterations is not None:
        cfg.train.iterations = args.iterations
        cfg.train.tv_off_after = min(cfg.train.tv_off_after, max(args.iterations - 1, 0))
    if args.seed is not None:
        cfg.train.seed = args.seed
    train_cfg = cfg.train.build()
    truth = io.read_truth(args.data)
    data = io.read_kspace(args.data)
    if truth.coils.maps.shape[1:] != data.shape:
        raise ShapeError(f"coil grid {truth.coils.maps.shape[1:]} != k-space grid {data.shape}")
    grid = make_grid(*data.shape)
    params = init_params(*cfg.networks.configs(), seed=train_cfg.seed,
                         b0_scale=cfg.networks.b0_scale, dtype=cfg.networks.torch_dtype)
    true_b0 = truth.b0_model if args.oracle_b0 else None
    params, state = fit(data, truth.coils, grid, params, train_cfg, true_b0=true_b0,
                        log_every=args.log_every)
    image, b0 = infer(params, grid)
    if true_b0 is not None:
        b0 = true_b0.evaluate(grid)
    history = state.history_array()
    io.write_results(args.out, image, b0, history, params, cfg.dumps(), train_cfg.seed)
    io.write_loss_text(os.path.splitext(args.out)[0] + ".loss.txt", history)
    print(f"wrote {args.out}: {train_cfg.iterations} iterations, "
          f"final data term {history[-1, 0]:.3e}")


def _scenario(data_path) -> dict:
    try:
        data = io.read_kspace(data_path)
    except io.ContainerError:
        return {}
    return {"views": [v.theta.theta for v in data.views], "R": data.views[0].R,
            "seed": data.seed, "noise_snr_db": data.noise_snr}


def cmd_evaluate(args):
    truth = io.read_truth(args.data)
    res = io.read_results(args.results)
    if res.image.shape != truth.image.shape or res.b0.shape != truth.b0.shape:
        raise ShapeError(f"recon grid {res.image.shape} != truth grid {truth.image.shape}")
    mask = support_mask(truth.image, args.threshold)
    report = evaluate_metrics(res.image, truth.image, res.b0, truth.b0, mask,
                              _scenario(args.data))
    out = args.out or os.path.splitext(args.results)[0] + ".metrics.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)
    print(report.summary())


def cmd_plot(args):
    truth = io.read_truth(args.data)
    res = io.read_results(args.results)
    roi = parse_roi(args.roi, truth.image.shape)
    files = render_all(truth.image, res.image, truth.b0, res.b0, args.outdir,
                       args.prefix, roi, args.error_max_fraction)
    for f in files:
        print(f)


def cmd_config(args):
    text = RunConfig().dumps()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pinr", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", help="write analytic truth, B0 field and coils")
    s.add_argument("--out", required=True)
    s.add_argument("--size", type=int)
    s.add_argument("--coils", type=int)
    s.add_argument("--b0-peak-hz", dest="b0_peak_hz", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("simulate", help="append rotated-view EPI k-space")
    s.add_argument("--data", required=True)
    s.add_argument("--preset", choices=["two-view", "three-view"])
    s.add_argument("--views", help="comma-separated view angles in degrees")
    s.add_argument("--R", type=int)
    s.add_argument("--line-offset", dest="line_offset", type=int, default=0)
    s.add_argument("--esp", type=float, help="echo spacing in seconds (default 0.25 ms * R)")
    s.add_argument("--noise-snr", dest="noise_snr", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reconstruct", help="jointly fit image and B0 networks")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="TOML config or a results file with an embedded config")
    s.add_argument("--iterations", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--oracle-b0", dest="oracle_b0", action="store_true",
                   help="freeze the field at the stored truth and fit the image only")
    s.add_argument("--log-every", dest="log_every", type=int, default=500)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("evaluate", help="write a JSON metric report")
    s.add_argument("--results", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.add_argument("--threshold", type=float, default=0.05)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("plot", help="render image and B0 comparison figures")
    s.add_argument("--results", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--outdir", default=".")
    s.add_argument("--prefix", default="pinr")
    s.add_argument("--roi", help="x0,y0,x1,y1 in pixels")
    s.add_argument("--error-max-fraction", dest="error_max_fraction", type=float, default=0.1)
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("config", help="print the default run configuration")
    s.add_argument("--out")
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (DivergenceError, NumericError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
