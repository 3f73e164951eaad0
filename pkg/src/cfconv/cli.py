"""Command-line interface.

Verbs: train, eval, param-count, profile-memory, bench, export-kernels,
spectral-bias, make-synthetic. Every command prints a human-readable
summary and writes machine-readable output (CSV or binary) under --out.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure during training.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .bench import run_bench
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import (
    DatasetFormatError,
    load_dataset,
    make_synthetic_dataset,
    read_dataset,
)
from .export import export_kernels
from .kernelgen import count_discrete_fourier, count_discrete_spatial
from .profiling import estimate_memory, layer_parameter_rows, model_parameter_total
from .spectral import PROTOCOL_NOTE, spectral_bias_experiment
from .training import (
    ConfigError,
    ModelConfig,
    NumericalAbortError,
    build_model,
    evaluate,
    run_training,
)

# rounded reference totals the architecture is calibrated against
_REFERENCE_TOTALS = {"spatial3x3": "60K", "hw": "107K", "hw-cin-cout": "59K"}


def _load_config(args, require_file=False):
    data = {}
    if args.config is not None:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            text = fh.read()
        data = ModelConfig.from_json(text).to_dict()
    elif require_file:
        raise ConfigError("--config is required for this command")
    if getattr(args, "parameterization", None):
        if args.parameterization == "spatial3x3":
            data["baseline"] = True
        else:
            data["baseline"] = False
            data["parameterization"] = args.parameterization
            data["mlp_widths"] = None
    if getattr(args, "selected_positions", None):
        sp = args.selected_positions
        data["selected_positions"] = sp if sp == "all" else int(sp)
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "epochs", None):
        data["epochs"] = args.epochs
    if getattr(args, "batch_size", None):
        data["batch_size"] = args.batch_size
    return ModelConfig.from_dict(data)


def _out_dir(args):
    out = args.out or "cfconv_out"
    os.makedirs(out, exist_ok=True)
    return out


def _say(args, *message):
    if not args.quiet:
        print(*message)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(args):
    config = _load_config(args)
    if args.data is None:
        raise ConfigError("--data is required for train")
    images, labels = read_dataset(args.data)
    data_dims = images.shape[1:]
    config_dims = (config.input_height, config.input_width, config.input_channels)
    if config_dims != data_dims:
        if args.config is not None:
            raise ConfigError(
                f"config input shape {config_dims} does not match dataset {data_dims}"
            )
        d = config.to_dict()
        d["input_height"], d["input_width"], d["input_channels"] = map(int, data_dims)
        config = ModelConfig.from_dict(d)
    out = _out_dir(args)
    model = build_model(config)
    _say(args, f"training {config.parameterization if not config.baseline else 'spatial3x3'}"
               f" model, {model.parameter_count()} parameters, seed {config.seed}")
    optimizer, rows = run_training(
        model, images, labels,
        metrics_path=os.path.join(out, "metrics.csv"),
        quiet=args.quiet,
    )
    ckpt = os.path.join(out, "checkpoint.cfcv")
    save_checkpoint(ckpt, model, optimizer, next_step=sum(r[2] == "train" for r in rows))
    train_rows = [r for r in rows if r[2] == "train"]
    _say(args, f"{len(train_rows)} steps; final loss {train_rows[-1][3]:.6f}; "
               f"wrote {ckpt} and metrics.csv")
    return 0


def cmd_eval(args):
    if args.checkpoint is None or args.data is None:
        raise ConfigError("--checkpoint and --data are required for eval")
    if not os.path.exists(args.checkpoint):
        raise CheckpointError(f"checkpoint not found: {args.checkpoint}")
    model, _, _ = load_checkpoint(args.checkpoint, build_model)
    batches = load_dataset(args.data, model.config.batch_size)
    accuracy, loss = evaluate(model, batches)
    print(f"accuracy {accuracy:.6f} loss {loss:.6f}")
    if args.out:
        out = _out_dir(args)
        with open(os.path.join(out, "eval.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["accuracy", "loss"])
            writer.writerow([f"{accuracy:.10g}", f"{loss:.10g}"])
    return 0


def cmd_param_count(args):
    config = _load_config(args)
    out = _out_dir(args)
    rows = layer_parameter_rows(config)
    total = model_parameter_total(config)
    name = "spatial3x3" if config.baseline else config.parameterization
    print(f"parameter counts for {name} "
          f"({config.layer_count} layers, {config.filters_per_layer} filters, "
          f"{config.input_height}x{config.input_width}x{config.input_channels} input)")
    for layer_name, mlps, count in rows:
        print(f"  {layer_name:>6}: {count:>10,} params  ({mlps} MLPs)")
    print(f"  total : {total:>10,} params")
    ref = _REFERENCE_TOTALS.get(name)
    if ref:
        print(f"  published reference (rounded): {ref}")
        if name == "hw-cin-cout":
            print("  note: the published 59K exceeds this constructive sum by ~5%;")
            print("  both figures are reported, the gap's source is unresolved.")
    dense_spatial = count_discrete_spatial(3, 3, 10, 32)
    dense_fourier = count_discrete_fourier(150, 150, 10, 32)
    print("dense-kernel comparison (150x150 image, 10 -> 32 channels):")
    print(f"  spatial 3x3 kernel: {dense_spatial:,} params")
    print(f"  dense Fourier kernel: {dense_fourier:,} params")
    with open(os.path.join(out, "param_count.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "mlps", "params"])
        for layer_name, mlps, count in rows:
            writer.writerow([layer_name, mlps, count])
        writer.writerow(["total", "", total])
        writer.writerow(["dense_spatial_3x3_10_32", "", dense_spatial])
        writer.writerow(["dense_fourier_150_10_32", "", dense_fourier])
    return 0


def cmd_profile_memory(args):
    config = _load_config(args)
    out = _out_dir(args)
    filters = config.filters_per_layer
    widths = config.mlp_widths or ModelConfig().mlp_widths
    rows = estimate_memory(
        config.input_height, config.input_width, filters, filters,
        widths, float_bytes=args.float_bytes, sparse_s=args.sparse,
    )
    print(f"peak-memory model for a {config.input_height}x{config.input_width} "
          f"{filters}->{filters} layer (shared widths {list(widths)}, "
          f"{args.float_bytes}-byte floats), ascending:")
    for r in rows:
        print(f"  {r.parameterization:>12} {r.mode:>14}: "
              f"{r.positions_per_unit:>12,} positions/unit, "
              f"{r.mlp_count:>5} MLPs, {r.bytes_peak:>15,} bytes peak")
    with open(os.path.join(out, "profile_memory.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameterization", "mode", "positions_per_unit",
                         "mlp_count", "bytes_peak"])
        for r in rows:
            writer.writerow([r.parameterization, r.mode, r.positions_per_unit,
                             r.mlp_count, r.bytes_peak])
    return 0


def cmd_bench(args):
    out = _out_dir(args)
    report = run_bench(quick=args.quick, seed=args.seed or 0)
    sup = report["support"]
    print("kernel-support invariance (fixed 64x64 grid):")
    print(f"  1x1-equivalent support: {sup['support_1x1']:.4f} s/step")
    print(f"  full-support kernel   : {sup['support_full']:.4f} s/step")
    print(f"  ratio: {sup['ratio']:.3f}")
    print(f"spatial 3x3 baseline: {report['baseline']['baseline_step']:.4f} s/step")
    print("step time by selected positions:")
    for s, t in report["selected_positions"].items():
        print(f"  S={s:>8,}: {t:.4f} s/step")
    with open(os.path.join(out, "bench.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "name", "seconds"])
        writer.writerow(["support", "1x1", f"{sup['support_1x1']:.6f}"])
        writer.writerow(["support", "full", f"{sup['support_full']:.6f}"])
        writer.writerow(["baseline", "step", f"{report['baseline']['baseline_step']:.6f}"])
        for s, t in report["selected_positions"].items():
            writer.writerow(["selected_positions", s, f"{t:.6f}"])
    return 0


def cmd_export_kernels(args):
    if args.checkpoint is None:
        raise ConfigError("--checkpoint is required for export-kernels")
    if not os.path.exists(args.checkpoint):
        raise CheckpointError(f"checkpoint not found: {args.checkpoint}")
    model, _, _ = load_checkpoint(args.checkpoint, build_model)
    out = _out_dir(args)
    written = export_kernels(model, out)
    _say(args, f"wrote {len(written)} files to {out}")
    return 0


def cmd_spectral_bias(args):
    out = _out_dir(args)
    seed = args.seed or 0
    report_a, report_b = spectral_bias_experiment(steps=args.steps, seed=seed)
    print(f"# {PROTOCOL_NOTE}")
    for rep in (report_a, report_b):
        low, mid, high = rep.band_mse
        print(f"{rep.domain:>12}: low {low:.3e}  mid {mid:.3e}  high {high:.3e} "
              f"({rep.parameter_count} params, {rep.steps} steps)")
    better = report_b.band_mse[2] < report_a.band_mse[2]
    print(f"fourier-fit high-band error {'<' if better else '>='} spatial-fit high-band error")
    with open(os.path.join(out, "spectral_bias.csv"), "w", newline="") as fh:
        fh.write(f"# {PROTOCOL_NOTE}\n")
        writer = csv.writer(fh)
        writer.writerow(["target", "domain", "band", "mse"])
        for rep in (report_a, report_b):
            for band, value in zip(("low", "mid", "high"), rep.band_mse):
                writer.writerow([rep.target, rep.domain, band, f"{value:.10g}"])
    return 0


def cmd_make_synthetic(args):
    if args.out_file is None:
        raise ConfigError("--out-file is required for make-synthetic")
    parent = os.path.dirname(os.path.abspath(args.out_file))
    os.makedirs(parent, exist_ok=True)
    make_synthetic_dataset(args.count, args.size, args.seed or 0, args.out_file)
    _say(args, f"wrote {args.count} {args.size}x{args.size} images to {args.out_file}")
    return 0


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(prog="cfconv", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--quiet", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common])
    p.add_argument("--data", default=None)
    p.add_argument("--selected-positions", dest="selected_positions", default=None)
    p.add_argument("--parameterization", default=None,
                   choices=["hw", "hw-cin", "hw-cout", "hw-cin-cout", "spatial3x3"])
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common])
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--data", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("param-count", parents=[common])
    p.add_argument("--parameterization", default=None,
                   choices=["hw", "hw-cin", "hw-cout", "hw-cin-cout", "spatial3x3"])
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("profile-memory", parents=[common])
    p.add_argument("--sparse", type=int, default=2 ** 18)
    p.add_argument("--float-bytes", dest="float_bytes", type=int, default=4)
    p.set_defaults(func=cmd_profile_memory)

    p = sub.add_parser("bench", parents=[common])
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export-kernels", parents=[common])
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_export_kernels)

    p = sub.add_parser("spectral-bias", parents=[common])
    p.add_argument("--steps", type=int, default=5000)
    p.set_defaults(func=cmd_spectral_bias)

    p = sub.add_parser("make-synthetic", parents=[common])
    p.add_argument("--out-file", dest="out_file", default=None)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--size", type=int, default=32)
    p.set_defaults(func=cmd_make_synthetic)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DatasetFormatError, CheckpointError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalAbortError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
