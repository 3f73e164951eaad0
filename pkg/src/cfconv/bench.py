"""Relative-cost benchmarks for the training step.

Three measurements: (a) step time with a 1x1-equivalent spatial support
versus full H x W support at fixed grid size, which should agree because
the Fourier-domain work is identical pointwise math either way; (b) the
spatial 3x3 baseline step; (c) step time as the number of selected
positions grows. Absolute numbers are machine-local and only the ratios
are meaningful.
"""

from __future__ import annotations

import time

import numpy as np

from .data import Batch
from .training import Adam, ModelConfig, build_model, train_step

__all__ = ["median_step_time", "bench_support_invariance", "bench_baseline",
           "bench_selected_positions", "run_bench"]


def _random_batch(config, rng):
    images = rng.random(
        (config.batch_size, config.input_height, config.input_width,
         config.input_channels)
    )
    labels = (rng.random(config.batch_size) < 0.5).astype(np.float64)
    return Batch(images, labels)


def median_step_time(model, batch, repeats=5, warmup=2):
    """Median wall-clock seconds of a full train step (fresh optimizer)."""
    optimizer = Adam.from_config(model.config)
    times = []
    for i in range(warmup + repeats):
        start = time.perf_counter()
        train_step(model, optimizer, batch, i)
        elapsed = time.perf_counter() - start
        if i >= warmup:
            times.append(elapsed)
    return float(np.median(times))


def _bench_config(h, w, channels, s, batch, seed=0, **kwargs):
    return ModelConfig(
        layer_count=1,
        filters_per_layer=channels,
        input_height=h,
        input_width=w,
        input_channels=channels,
        selected_positions=s,
        batch_size=batch,
        seed=seed,
        **kwargs,
    )


def bench_support_invariance(h=64, w=64, channels=8, s=2 ** 12, batch=4,
                             repeats=5, seed=0):
    """Step time with a 1x1-support kernel vs a full-support kernel."""
    rng = np.random.default_rng(seed)
    config = _bench_config(h, w, channels, s, batch, seed)
    batch_data = _random_batch(config, rng)

    model = build_model(config)
    layer = model.conv_layers[0]
    # 1x1 spatial support: a delta filter transforms to a constant spectrum
    layer.state.re_plane[...] = rng.uniform(-1, 1, size=(1, 1, channels, channels))
    layer.state.im_plane[...] = 0.0
    t_small = median_step_time(model, batch_data, repeats)

    model = build_model(config)  # fresh U[-1,1] state: full spatial support
    t_full = median_step_time(model, batch_data, repeats)
    return {"support_1x1": t_small, "support_full": t_full,
            "ratio": t_full / t_small}


def bench_baseline(h=64, w=64, channels=8, batch=4, repeats=5, seed=0):
    rng = np.random.default_rng(seed)
    config = _bench_config(h, w, channels, 1, batch, seed,
                           baseline=True, parameterization="hw-cin-cout")
    model = build_model(config)
    return {"baseline_step": median_step_time(model, _random_batch(config, rng), repeats)}


def bench_selected_positions(h=64, w=64, channels=8, batch=4, repeats=5,
                             s_values=(2 ** 12, 2 ** 15, 2 ** 18), seed=0):
    rng = np.random.default_rng(seed)
    times = {}
    for s in s_values:
        config = _bench_config(h, w, channels, s, batch, seed)
        model = build_model(config)
        times[s] = median_step_time(model, _random_batch(config, rng), repeats)
    return times


def run_bench(quick=False, seed=0):
    """All three sections; ``quick`` shrinks repeats for smoke testing."""
    repeats = 3 if quick else 5
    return {
        "support": bench_support_invariance(repeats=repeats, seed=seed),
        "baseline": bench_baseline(repeats=repeats, seed=seed),
        "selected_positions": bench_selected_positions(repeats=repeats, seed=seed),
    }
