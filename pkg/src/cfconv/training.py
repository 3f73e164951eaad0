"""The 6-block classifier, Adam, and the sparse-update training loop.

Each block is a continuous Fourier convolution (or a spatial 3x3 conv
in baseline mode) followed by a spatial ReLU. The conv stack keeps the
spatial extent constant; a per-channel global average pool feeds dense
layers of 128 and 64 units and a sigmoid readout for binary labels.

A training step draws an independent position selection per conv layer,
runs the blended forward pass, backpropagates binary cross-entropy,
applies Adam to the MLP and head parameters, then commits the blended
kernel values into each layer's state.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, asdict

import numpy as np

from .autodiff import Tape
from .kernelgen import Parameterization, sample_positions
from .layers import CFConvLayer, spatial_conv3x3_forward

__all__ = [
    "ModelConfig",
    "ConfigError",
    "NumericalAbortError",
    "ClassifierModel",
    "SpatialConvBlock",
    "build_model",
    "Adam",
    "adam_update",
    "train_step",
    "evaluate",
    "run_training",
    "HEAD_WIDTHS",
]

HEAD_WIDTHS = (128, 64)

# spawn-key namespaces for deriving independent RNG streams from one seed
_NS_STATE, _NS_MLP, _NS_HEAD, _NS_SELECT, _NS_SHUFFLE = range(5)


class ConfigError(ValueError):
    """A model or run configuration is invalid."""


class NumericalAbortError(FloatingPointError):
    """Training hit a non-finite value; message names layer and step."""


def _rng_for(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class ModelConfig:
    """Everything needed to rebuild a model and reproduce a run."""

    layer_count: int = 6
    filters_per_layer: int = 32
    input_height: int = 150
    input_width: int = 150
    input_channels: int = 3
    parameterization: str = "hw-cin-cout"
    baseline: bool = False  # spatial 3x3 stack instead of CF-Conv
    mlp_widths: tuple | None = None
    selected_positions: int | str = 2 ** 18  # or "all"
    ema_alpha: float = 0.1
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 1
    augment: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.filters_per_layer < 1:
            raise ConfigError("filters_per_layer must be >= 1")
        if self.layer_count < 1:
            raise ConfigError("layer_count must be >= 1")
        if not self.baseline:
            try:
                variant = Parameterization(self.parameterization)
            except ValueError:
                raise ConfigError(
                    f"unknown parameterization {self.parameterization!r}"
                ) from None
            if self.mlp_widths is None:
                self.mlp_widths = variant.default_widths
            self.mlp_widths = tuple(int(w) for w in self.mlp_widths)
            if self.mlp_widths[-1] != 1:
                raise ConfigError("mlp_widths must end in 1")
        if self.selected_positions != "all":
            self.selected_positions = int(self.selected_positions)
            if self.selected_positions < 1:
                raise ConfigError("selected_positions must be >= 1 or 'all'")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ConfigError("ema_alpha must be in (0, 1]")

    def to_dict(self):
        d = asdict(self)
        if d["mlp_widths"] is not None:
            d["mlp_widths"] = list(d["mlp_widths"])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc


class SpatialConvBlock:
    """Weights of one zero-padded 3x3 conv layer (no bias)."""

    def __init__(self, c_in, c_out, rng, name):
        bound = math.sqrt(6.0 / (9 * c_in))
        self.weights = rng.uniform(-bound, bound, size=(3, 3, c_in, c_out))
        self.name = name

    def parameters(self):
        return {f"{self.name}.w": self.weights}


class ClassifierModel:
    """Conv stack -> per-channel global average pool -> 128/64/1 head."""

    def __init__(self, config):
        self.config = config
        h, w = config.input_height, config.input_width
        c_prev = config.input_channels
        self.conv_layers = []
        for i in range(config.layer_count):
            name = f"conv{i}"
            if config.baseline:
                layer = SpatialConvBlock(
                    c_prev, config.filters_per_layer,
                    _rng_for(config.seed, _NS_MLP, i), name,
                )
            else:
                layer = CFConvLayer(
                    (h, w, c_prev, config.filters_per_layer),
                    config.parameterization,
                    mlp_widths=config.mlp_widths,
                    ema_alpha=config.ema_alpha,
                    rng=_rng_for(config.seed, _NS_STATE, i),
                    name=name,
                )
            self.conv_layers.append(layer)
            c_prev = config.filters_per_layer
        rng = _rng_for(config.seed, _NS_HEAD)
        self.head_weights = []
        self.head_biases = []
        fan_in = c_prev
        for width in (*HEAD_WIDTHS, 1):
            # deliberately small (1/fan_in, not sqrt): spectral products of
            # U[-1,1] kernels leave pooled features far above unit scale, and
            # a sqrt-fan-in head saturates the sigmoid at step 0
            bound = 1.0 / fan_in
            self.head_weights.append(rng.uniform(-bound, bound, size=(fan_in, width)))
            self.head_biases.append(np.zeros(width))
            fan_in = width

    # -- parameters ----------------------------------------------------------

    def parameters(self):
        params = {}
        for layer in self.conv_layers:
            params.update(layer.parameters())
        for i, (w, b) in enumerate(zip(self.head_weights, self.head_biases)):
            params[f"head.w{i}"] = w
            params[f"head.b{i}"] = b
        return params

    def parameter_count(self):
        return sum(v.size for v in self.parameters().values())

    # -- selections -----------------------------------------------------------

    def draw_selections(self, step):
        """One independent SelectionSet per CF-Conv layer for this step."""
        if self.config.baseline:
            return [None] * len(self.conv_layers)
        selections = []
        for i, layer in enumerate(self.conv_layers):
            total = math.prod(layer.dims)
            want = self.config.selected_positions
            count = total if want == "all" else min(int(want), total)
            rng = _rng_for(self.config.seed, _NS_SELECT, step, i)
            selections.append(sample_positions(layer.dims, count, rng))
        return selections

    # -- tape forward ----------------------------------------------------------

    def _head_on_tape(self, tape, node):
        last = len(self.head_weights) - 1
        for i, (w, b) in enumerate(zip(self.head_weights, self.head_biases)):
            wn = tape.leaf(w, param_id=f"head.w{i}")
            bn = tape.leaf(b, param_id=f"head.b{i}")
            node = tape.record("linear", (node, wn, bn))
            if i != last:
                node = tape.record("relu", (node,))
        return tape.record("sigmoid", (node,))

    def tape_forward(self, tape, images, selections):
        """Record the full model; returns (probs node, per-layer phis, acts)."""
        node = tape.constant(np.asarray(images, dtype=np.float64))
        phis = []
        activations = []
        for layer, sel in zip(self.conv_layers, selections):
            if self.config.baseline:
                wn = tape.leaf(layer.weights, param_id=f"{layer.name}.w")
                node = tape.record("conv3x3", (node, wn))
                phis.append(None)
            else:
                node, phi = layer.forward(tape, node, sel)
                phis.append(phi)
            node = tape.record("relu", (node,))
            activations.append(node)
        pooled = tape.record("mean_pool_spatial", (node,), axes=(1, 2))
        probs = self._head_on_tape(tape, pooled)
        return probs, phis, activations

    def loss_forward(self, tape, images, labels, selections):
        probs, phis, activations = self.tape_forward(tape, images, selections)
        loss = tape.record(
            "binary_cross_entropy", (probs,), labels=np.asarray(labels, dtype=np.float64)
        )
        return loss, probs, phis, activations

    # -- inference -------------------------------------------------------------

    def inference_probs(self, images):
        """Forward pass from stored kernels only; no MLPs, no mutation."""
        x = np.asarray(images, dtype=np.float64)
        for layer in self.conv_layers:
            if self.config.baseline:
                x = spatial_conv3x3_forward(layer.weights, x)
            else:
                x = layer.infer(x)
            x = np.maximum(x, 0.0)
        pooled = x.mean(axis=(1, 2))
        h = pooled
        last = len(self.head_weights) - 1
        for i, (w, b) in enumerate(zip(self.head_weights, self.head_biases)):
            h = h @ w + b
            if i != last:
                h = np.maximum(h, 0.0)
        z = np.exp(-np.abs(h))
        return np.where(h >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).ravel()


def build_model(config):
    """Instantiate the classifier described by a ModelConfig."""
    if isinstance(config, dict):
        config = ModelConfig.from_dict(config)
    return ClassifierModel(config)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


def adam_update(param, grad, m, v, t, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam step; returns (new_param, new_m, new_v)."""
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


class Adam:
    """Adam with per-parameter moment state, updating arrays in place."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.t = 0

    @classmethod
    def from_config(cls, config):
        return cls(config.learning_rate, config.beta1, config.beta2, config.adam_eps)

    def step(self, params, grads):
        self.t += 1
        for pid, param in params.items():
            if pid not in self.m:
                self.m[pid] = np.zeros_like(param)
                self.v[pid] = np.zeros_like(param)
            new_param, self.m[pid], self.v[pid] = adam_update(
                param, grads[pid], self.m[pid], self.v[pid], self.t,
                self.lr, self.beta1, self.beta2, self.eps,
            )
            param[...] = new_param


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def train_step(model, optimizer, batch, step):
    """One optimization step; returns metrics for the CSV log."""
    started = time.perf_counter()
    selections = model.draw_selections(step)
    tape = Tape()
    loss_node, probs, phis, activations = model.loss_forward(
        tape, batch.images, batch.labels, selections
    )
    loss = float(np.asarray(loss_node.value))
    if not np.isfinite(loss):
        for i, act in enumerate(activations):
            if not np.all(np.isfinite(act.value)):
                raise NumericalAbortError(f"non-finite activation at layer {i}, step {step}")
        raise NumericalAbortError(f"non-finite loss at step {step}")
    grads = tape.backward(loss_node)
    optimizer.step(model.parameters(), grads)
    if not model.config.baseline:
        for layer, sel, phi in zip(model.conv_layers, selections, phis):
            layer.commit_update(sel, *phi)
    preds = (np.asarray(probs.value).ravel() >= 0.5).astype(np.float64)
    accuracy = float(np.mean(preds == batch.labels))
    grad_norm = math.sqrt(sum(float(np.sum(np.abs(g) ** 2)) for g in grads.values()))
    return {
        "loss": loss,
        "accuracy": accuracy,
        "grad_norm": grad_norm,
        "seconds": time.perf_counter() - started,
    }


def evaluate(model, batches):
    """Accuracy and mean loss over batches, inference mode (no mutation)."""
    total = 0
    correct = 0
    loss_sum = 0.0
    for batch in batches:
        probs = model.inference_probs(batch.images)
        pc = np.clip(probs, 1e-12, 1.0 - 1e-12)
        loss_sum += float(
            -np.sum(batch.labels * np.log(pc) + (1 - batch.labels) * np.log(1 - pc))
        )
        correct += int(np.sum((probs >= 0.5) == (batch.labels == 1.0)))
        total += len(batch)
    if total == 0:
        return 0.0, 0.0
    return correct / total, loss_sum / total


def run_training(model, images, labels, eval_batches=None, metrics_path=None,
                 on_epoch=None, quiet=True):
    """Epoch loop over an in-memory dataset; returns the metric rows.

    Batch order reshuffles each epoch from the config seed; CF-Conv
    selections are drawn per (step, layer). Rows follow the metrics CSV
    schema: step, epoch, split, loss, accuracy, grad_norm, seconds.
    """
    from .data import make_batches

    config = model.config
    optimizer = Adam.from_config(config)
    rows = []
    step = 0
    for epoch in range(config.epochs):
        batches = make_batches(
            images, labels, config.batch_size,
            seed=np.random.SeedSequence(config.seed, spawn_key=(_NS_SHUFFLE, epoch)),
            shuffle=True, augment=config.augment,
        )
        for batch in batches:
            metrics = train_step(model, optimizer, batch, step)
            rows.append(
                (step, epoch, "train", metrics["loss"], metrics["accuracy"],
                 metrics["grad_norm"], metrics["seconds"])
            )
            step += 1
        if eval_batches is not None:
            acc, loss = evaluate(model, eval_batches)
            rows.append((step, epoch, "eval", loss, acc, "", ""))
            if not quiet:
                print(f"epoch {epoch}: eval accuracy {acc:.4f} loss {loss:.4f}")
        if on_epoch is not None:
            on_epoch(epoch, model)
    if metrics_path is not None:
        write_metrics_csv(metrics_path, rows)
    return optimizer, rows


def write_metrics_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("step,epoch,split,loss,accuracy,grad_norm,seconds\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)
