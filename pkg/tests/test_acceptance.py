"""Acceptance suite: one PASS/FAIL line per criterion, summarized at the end of the run.

Criteria 4, 5 and 6 train full-size networks and take a long time on one CPU
core; they are marked ``slow`` but are part of the default run.
"""

import itertools
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import crandn, record_criterion
from oracles import brute_force_epi, fd_gradient_check, gradient_matches, reduced_problem
from pinr import io
from pinr.cli import main
from pinr.encode import ViewSpec, adjoint_view, forward_view, simulate_views
from pinr.inr import default_configs, init_params
from pinr.metrics import b0_mae, psnr
from pinr.phantom import eval_phantom, rotate_phantom_params, shepp_logan, support_mask
from pinr.scenarios import DEFAULT_PEAK, preset_views, standard_scenario
from pinr.train import TrainConfig, fit, infer, tv_weight

# criterion 5 thresholds, frozen after the pilot run documented in the README
JOINT_PSNR_DB = 30.0
JOINT_B0_MAE_HZ = 3.0
JOINT_RUNTIME_S = 15 * 60


def test_c01_forward_matches_brute_force():
    rng = np.random.default_rng(1)
    H = W = 12
    m = crandn(rng, (H, W))
    b0 = rng.uniform(-150, 150, (H, W))
    maps = crandn(rng, (2, H, W))
    view = ViewSpec(0.0, 2)
    start = time.perf_counter()
    got = forward_view(m, b0, maps, view)
    ref = brute_force_epi(m, b0, maps, view)
    elapsed = time.perf_counter() - start
    err = np.max(np.abs(got - ref)) / np.max(np.abs(ref))
    ok = err < 1e-10 and elapsed < 5
    record_criterion(1, "forward-model oracle", ok,
                     f"max rel err {err:.2e} (< 1e-10), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_c02_adjointness_sweep():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for C, R, n in itertools.product((1, 4, 8), (1, 2, 4), (16, 32)):
        view = ViewSpec(0.0, R)
        maps = crandn(rng, (C, n, n))
        for _ in range(10):
            x, y = crandn(rng, (n, n)), crandn(rng, (C, n, n))
            lhs = np.vdot(y, forward_view(x, None, maps, view))
            rhs = np.vdot(adjoint_view(y, maps, view), x)
            worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(x) * np.linalg.norm(y)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and elapsed < 30
    record_criterion(2, "adjointness dot-product sweep", ok,
                     f"worst {worst:.2e} over 180 draws (< 1e-12), {elapsed:.1f} s (< 30 s)")
    assert ok


def test_c03_loss_gradient_finite_differences():
    start = time.perf_counter()
    params, problem, cfg = reduced_problem(size=8, seed=0)
    checks = fd_gradient_check(params, problem, cfg, n_samples=100, seed=0)
    elapsed = time.perf_counter() - start
    bad = [c for c in checks if not gradient_matches(c[2], c[3])]
    live = sum(1 for c in checks if c[2] != 0.0 or c[3] != 0.0)
    worst = max(abs(a - n) / max(abs(a), abs(n)) for _, _, a, n in checks if a or n)
    ok = not bad and elapsed < 120
    record_criterion(3, "loss gradient vs finite differences", ok,
                     f"{100 - len(bad)}/100 entries within 1e-4 rel ({live} non-zero, "
                     f"worst rel {worst:.1e}), {elapsed:.1f} s (< 120 s)")
    assert ok


def _truth(sc):
    return eval_phantom(sc.phantom, sc.grid), sc.b0.evaluate(sc.grid)


@pytest.mark.slow
def test_c04_oracle_field_identifiability():
    sc = standard_scenario()
    data = simulate_views(sc.phantom, sc.b0, sc.coils, sc.views)
    truth, _ = _truth(sc)
    params = init_params(*default_configs(), seed=0)
    best = {"psnr": -math.inf, "iteration": None}

    def monitor(state):
        if (state.iteration + 1) % 100:
            return False
        image, _ = infer(state.params, sc.grid)
        value = psnr(np.abs(image), np.abs(truth))
        if value > best["psnr"]:
            best.update(psnr=value, iteration=state.iteration + 1)
        return value >= 40.0

    start = time.perf_counter()
    fit(data, sc.coils, sc.grid, params, TrainConfig(), true_b0=sc.b0, callback=monitor,
        log_every=0)
    elapsed = time.perf_counter() - start
    ok = best["psnr"] >= 40.0
    record_criterion(4, "oracle-B0 image identifiability", ok,
                     f"PSNR {best['psnr']:.2f} dB at iteration {best['iteration']} "
                     f"(>= 40 dB within 6000), {elapsed / 60:.1f} min")
    assert ok


@pytest.mark.slow
def test_c05_joint_three_view_recovery():
    sc = standard_scenario()
    data = simulate_views(sc.phantom, sc.b0, sc.coils, sc.views)
    truth, true_b0 = _truth(sc)
    mask = support_mask(truth)
    params = init_params(*default_configs(), seed=0)
    start = time.perf_counter()
    params, state = fit(data, sc.coils, sc.grid, params, TrainConfig(), log_every=0)
    elapsed = time.perf_counter() - start
    image, field = infer(params, sc.grid)
    masked_psnr = psnr(np.abs(image)[mask], np.abs(truth)[mask])
    mae = b0_mae(field, true_b0, mask)
    hist = state.history_array()
    quality = (masked_psnr >= JOINT_PSNR_DB and mae <= JOINT_B0_MAE_HZ
               and np.all(np.isfinite(hist)) and hist[-1, 0] < hist[99, 0])
    record_criterion(5, "joint three-view recovery", quality,
                     f"masked PSNR {masked_psnr:.2f} dB (>= {JOINT_PSNR_DB}), B0 MAE {mae:.3f} Hz "
                     f"(<= {JOINT_B0_MAE_HZ}), data term {hist[99, 0]:.2e} -> {hist[-1, 0]:.2e}")
    # the runtime target is reported on its own line; see the decisions ledger
    record_criterion(5, "joint three-view runtime target", elapsed < JOINT_RUNTIME_S,
                     f"{elapsed / 60:.1f} min for 6000 iterations (target < 15 min)")
    assert quality


def _peak_roi(grid, truth, radius_sigmas=2.0):
    dx = grid.x - DEFAULT_PEAK.center_x
    dy = grid.y - DEFAULT_PEAK.center_y
    inside = np.hypot(dx, dy) <= radius_sigmas * DEFAULT_PEAK.sigma
    return inside & support_mask(truth)


# 48 rows keep the total acquired lines equal: 2 views x 12 (R=4) = 3 views x 8 (R=6)
MULTIVIEW_SIZE = 48


def _peak_mae(preset, seed):
    views = preset_views(preset)
    sc = standard_scenario(MULTIVIEW_SIZE, views, seed=seed)
    data = simulate_views(sc.phantom, sc.b0, sc.coils, sc.views)
    truth, true_b0 = _truth(sc)
    params = init_params(*default_configs(), seed=seed)
    fit(data, sc.coils, sc.grid, params, TrainConfig(seed=seed), log_every=0)
    _, field = infer(params, sc.grid)
    lines = sum(len(v.acquired_lines(MULTIVIEW_SIZE)) for v in views)
    return b0_mae(field, true_b0, _peak_roi(sc.grid, truth)), lines


@pytest.mark.slow
def test_c06_more_views_better_field():
    two, three = [], []
    for seed in range(5):
        mae2, lines2 = _peak_mae("two-view", seed)
        mae3, lines3 = _peak_mae("three-view", seed)
        assert lines2 == lines3
        two.append(mae2)
        three.append(mae3)
    med2, med3 = float(np.median(two)), float(np.median(three))
    ok = med3 < med2
    record_criterion(6, "three-view beats two-view in the B0 peak", ok,
                     f"median peak-ROI MAE three-view {med3:.2f} Hz vs two-view {med2:.2f} Hz "
                     f"({lines2} lines each, 5 seeds; per seed 3v "
                     f"{', '.join(f'{v:.2f}' for v in three)} / 2v "
                     f"{', '.join(f'{v:.2f}' for v in two)})")
    assert ok


def test_c07_schedule_conformance():
    cfg = TrainConfig()
    start = time.perf_counter()
    mismatches = 0
    for it in range(cfg.iterations):
        expected = 1e-5 * 0.1 ** (it // 1000) if it < 5000 else 0.0
        mismatches += tv_weight(it, cfg) != expected
    tail_zero = all(tv_weight(it, cfg) == 0.0 for it in range(5000, 6000))
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and tail_zero and elapsed < 1
    record_criterion(7, "TV schedule conformance", ok,
                     f"{mismatches} mismatches over 6000 iterations, zero tail {tail_zero}, "
                     f"{elapsed * 1e3:.1f} ms (< 1 s)")
    assert ok


def test_c08_rotation_equivariance():
    phantom = shepp_logan()
    sc = standard_scenario(32)
    worst = {}
    for theta in (90.0, 120.0, 180.0):
        rotated_view = ViewSpec(theta, 2)
        direct = simulate_views(phantom, sc.b0, sc.coils, [rotated_view]).data[0]
        moved = rotate_phantom_params(phantom, -theta)
        field = sc.b0.rotated(-theta)
        ref = simulate_views(moved, field, sc.coils, [ViewSpec(0.0, 2)]).data[0]
        worst[theta] = np.max(np.abs(direct - ref)) / np.max(np.abs(ref))
    ok = max(worst.values()) < 1e-12
    record_criterion(8, "rotation equivariance of simulation", ok,
                     ", ".join(f"{t:g} deg {e:.1e}" for t, e in worst.items()) + " (< 1e-12)")
    assert ok


def test_c09_end_to_end_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("PINR_DETERMINISTIC", "1")
    fields = []
    for run in range(2):
        path, out = tmp_path / f"d{run}.h5", tmp_path / f"r{run}.h5"
        assert main(["phantom", "--out", str(path), "--size", "32", "--seed", "3"]) == 0
        assert main(["simulate", "--data", str(path), "--preset", "three-view",
                     "--noise-snr", "40", "--seed", "5"]) == 0
        assert main(["reconstruct", "--data", str(path), "--out", str(out),
                     "--iterations", "20", "--seed", "11"]) == 0
        fields.append(io.read_results(out).b0)
    ok = np.array_equal(fields[0], fields[1])
    record_criterion(9, "end-to-end determinism", ok,
                     f"/recon/b0 bit-identical: {ok} (32x32, three-view, 20 iterations)")
    assert ok


def test_c10_metric_examples():
    target = Path(__file__).with_name("test_metrics.py")
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(target)], capture_output=True, text=True, cwd=target.parent)
    ok = proc.returncode == 0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else "no output"
    record_criterion(10, "metric unit examples", ok, f"test_metrics.py: {summary}")
    assert ok
