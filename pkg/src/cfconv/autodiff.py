"""Minimal reverse-mode differentiation over a fixed op set.

The tape records exactly the operations the classifier needs; each op
declares its own backward rule and which forward values it keeps, so
the activation cost of a recorded graph is explicit and measurable.

Complex-valued nodes (spectra, kernels) are differentiated by treating
the real and imaginary planes as independent real coordinates: the
gradient stored for a complex node is a complex array whose real part
is dL/d(re) and whose imaginary part is dL/d(im).
"""

from __future__ import annotations

import numpy as np

from .numerics import fft2, mul_accumulate

__all__ = [
    "SUPPORTED_OPS",
    "UnsupportedOpError",
    "NonScalarLossError",
    "Node",
    "Tape",
    "check_gradients",
]

SUPPORTED_OPS = frozenset(
    {
        "linear",
        "relu",
        "sigmoid",
        "mean_pool_spatial",
        "fft_2d",
        "ifft_2d_real",
        "complex_mul_accumulate",
        "scale_and_add",
        "binary_cross_entropy",
        "conv3x3",
    }
)

_BCE_EPS = 1e-12


class UnsupportedOpError(ValueError):
    """An op id outside the supported set was recorded."""


class NonScalarLossError(ValueError):
    """backward() was started from a node that is not a scalar."""


class Node:
    """One recorded value: a leaf or the output of a supported op."""

    __slots__ = ("index", "op", "value", "inputs", "saved", "attrs", "param_id")

    def __init__(self, index, op, value, inputs=(), saved=None, attrs=None, param_id=None):
        self.index = index
        self.op = op
        self.value = value
        self.inputs = inputs
        self.saved = saved
        self.attrs = attrs
        self.param_id = param_id

    def __repr__(self):
        return f"Node({self.index}, {self.op}, shape={np.shape(self.value)})"


# ---------------------------------------------------------------------------
# forward/backward rules
# ---------------------------------------------------------------------------


def _fwd_linear(vals, attrs):
    x, w = vals[0], vals[1]
    out = x @ w
    if len(vals) == 3:
        out = out + vals[2]
    return out, (x, w)


def _bwd_linear(g, saved, attrs, n_inputs):
    x, w = saved
    gx = g @ w.T
    gw = x.T @ g
    if n_inputs == 3:
        return [gx, gw, g.sum(axis=0)]
    return [gx, gw]


def _fwd_relu(vals, attrs):
    x = vals[0]
    return np.maximum(x, 0.0), (x > 0.0)


def _bwd_relu(g, saved, attrs, n_inputs):
    return [g * saved]


def _fwd_sigmoid(vals, attrs):
    x = np.asarray(vals[0], dtype=np.float64)
    z = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return s, s


def _bwd_sigmoid(g, saved, attrs, n_inputs):
    s = saved
    return [g * s * (1.0 - s)]


def _fwd_mean_pool(vals, attrs):
    x = vals[0]
    axes = attrs["axes"]
    return x.mean(axis=axes), (x.shape,)


def _bwd_mean_pool(g, saved, attrs, n_inputs):
    (shape,) = saved
    axes = attrs["axes"]
    count = 1
    for a in axes:
        count *= shape[a]
    gx = np.expand_dims(g, axes) / count
    return [np.broadcast_to(gx, shape).copy()]


def _fwd_fft2(vals, attrs):
    # real spatial input -> complex spectrum
    return fft2(vals[0], axes=attrs["axes"]), None


def _bwd_fft2(g, saved, attrs, n_inputs):
    axes = attrs["axes"]
    n = g.shape[axes[0]] * g.shape[axes[1]]
    # adjoint of the unnormalized forward DFT restricted to real inputs
    return [n * fft2(g, axes=axes, inverse=True).real]


def _fwd_ifft2_real(vals, attrs):
    out = np.ascontiguousarray(fft2(vals[0], axes=attrs["axes"], inverse=True).real)
    return out, None


def _bwd_ifft2_real(g, saved, attrs, n_inputs):
    axes = attrs["axes"]
    n = g.shape[axes[0]] * g.shape[axes[1]]
    return [fft2(g.astype(np.complex128), axes=axes) / n]


def _fwd_cma(vals, attrs):
    f = vals[0]
    if len(vals) == 3:
        k = vals[1] + 1j * vals[2]
    else:
        k = vals[1]
    return mul_accumulate(f, k), (f, k)


def _bwd_cma(g, saved, attrs, n_inputs):
    f, k = saved
    kc = np.conj(k)
    fc = np.conj(f)
    if f.ndim == 3:
        gf = np.einsum("hwo,hwio->hwi", g, kc)
        gk = np.einsum("hwi,hwo->hwio", fc, g)
    else:
        gm = np.moveaxis(g, 0, 2)  # [H, W, B, C_out]
        gf = np.moveaxis(gm @ kc.swapaxes(-1, -2), 2, 0)
        gk = np.moveaxis(fc, 0, 2).swapaxes(-1, -2) @ gm
    if n_inputs == 3:
        return [gf, np.ascontiguousarray(gk.real), np.ascontiguousarray(gk.imag)]
    return [gf, gk]


def _fwd_scale_and_add(vals, attrs):
    a = attrs["a"]
    b = attrs["b"]
    idx = attrs.get("indices")
    if len(vals) == 2:
        x, y = vals
    else:
        x, y = attrs["x_const"], vals[0]
    if idx is None:
        return a * x + b * y, None
    out = np.array(x, copy=True)
    out.flat[idx] = a * out.flat[idx] + b * y.ravel()
    return out, (y.shape,)


def _bwd_scale_and_add(g, saved, attrs, n_inputs):
    a = attrs["a"]
    b = attrs["b"]
    idx = attrs.get("indices")
    if idx is None:
        gy = b * g
        if n_inputs == 2:
            return [a * g, gy]
        return [gy]
    (y_shape,) = saved
    gy = (b * g.flat[idx]).reshape(y_shape)
    if n_inputs == 2:
        gx = np.array(g, copy=True)
        gx.flat[idx] = a * gx.flat[idx]
        return [gx, gy]
    return [gy]


def _fwd_bce(vals, attrs):
    p = vals[0].ravel()
    y = attrs["labels"].ravel()
    pc = np.clip(p, _BCE_EPS, 1.0 - _BCE_EPS)
    loss = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    inside = (p > _BCE_EPS) & (p < 1.0 - _BCE_EPS)
    return loss, (pc, y, inside, vals[0].shape)


def _bwd_bce(g, saved, attrs, n_inputs):
    pc, y, inside, shape = saved
    gp = np.where(inside, (pc - y) / (pc * (1.0 - pc)), 0.0) / pc.size
    return [float(g) * gp.reshape(shape)]


def _conv3x3_core(xp, w, h, wd):
    co = w.shape[3]
    out = np.zeros(xp.shape[:1] + (h, wd, co))
    for dy in range(3):
        for dx in range(3):
            patch = xp[:, dy:dy + h, dx:dx + wd, :]
            out += patch @ w[dy, dx]
    return out


def _fwd_conv3x3(vals, attrs):
    x, w = vals
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    return _conv3x3_core(xp, w, x.shape[1], x.shape[2]), (xp, w)


def _bwd_conv3x3(g, saved, attrs, n_inputs):
    xp, w = saved
    h, wd = g.shape[1], g.shape[2]
    gw = np.zeros_like(w)
    gxp = np.zeros_like(xp)
    ci = w.shape[2]
    co = w.shape[3]
    gm = g.reshape(-1, co)
    for dy in range(3):
        for dx in range(3):
            patch = xp[:, dy:dy + h, dx:dx + wd, :]
            gw[dy, dx] = patch.reshape(-1, ci).T @ gm
            gxp[:, dy:dy + h, dx:dx + wd, :] += g @ w[dy, dx].T
    return [gxp[:, 1:-1, 1:-1, :], gw]


_OPS = {
    "linear": (_fwd_linear, _bwd_linear),
    "relu": (_fwd_relu, _bwd_relu),
    "sigmoid": (_fwd_sigmoid, _bwd_sigmoid),
    "mean_pool_spatial": (_fwd_mean_pool, _bwd_mean_pool),
    "fft_2d": (_fwd_fft2, _bwd_fft2),
    "ifft_2d_real": (_fwd_ifft2_real, _bwd_ifft2_real),
    "complex_mul_accumulate": (_fwd_cma, _bwd_cma),
    "scale_and_add": (_fwd_scale_and_add, _bwd_scale_and_add),
    "binary_cross_entropy": (_fwd_bce, _bwd_bce),
    "conv3x3": (_fwd_conv3x3, _bwd_conv3x3),
}


class Tape:
    """Append-only record of a forward computation.

    Nodes are appended in execution order, so the list itself is a
    topological order and backward() is a single reverse sweep with
    additive gradient accumulation at fan-out.
    """

    def __init__(self):
        self.nodes = []

    def leaf(self, value, param_id=None):
        """Add an input node; give it a param_id to receive gradients."""
        node = Node(len(self.nodes), "leaf", np.asarray(value), param_id=param_id)
        self.nodes.append(node)
        return node

    def constant(self, value):
        return self.leaf(value)

    def record(self, op, inputs, **attrs):
        """Run ``op`` on node inputs and append the result node."""
        if op not in SUPPORTED_OPS:
            raise UnsupportedOpError(f"unsupported op id: {op!r}")
        values = [n.value for n in inputs]
        fwd, _ = _OPS[op]
        value, saved = fwd(values, attrs)
        node = Node(len(self.nodes), op, value, tuple(inputs), saved, attrs)
        self.nodes.append(node)
        return node

    def backward(self, loss):
        """Gradients of a scalar loss w.r.t. every param-carrying leaf."""
        if np.size(loss.value) != 1:
            raise NonScalarLossError(
                f"loss must be scalar, got shape {np.shape(loss.value)}"
            )
        store = {}
        for node in self.nodes:
            if node.op == "leaf" and node.param_id is not None:
                store[node.param_id] = np.zeros_like(np.asarray(node.value))
        buffers = {loss.index: np.ones_like(np.asarray(loss.value, dtype=np.float64))}
        for node in reversed(self.nodes[: loss.index + 1]):
            g = buffers.pop(node.index, None)
            if g is None:
                continue
            if node.op == "leaf":
                if node.param_id is not None:
                    store[node.param_id] += g.reshape(store[node.param_id].shape)
                continue
            _, bwd = _OPS[node.op]
            input_grads = bwd(g, node.saved, node.attrs, len(node.inputs))
            for inp, ig in zip(node.inputs, input_grads):
                if ig is None:
                    continue
                buf = buffers.get(inp.index)
                if buf is None:
                    buffers[inp.index] = ig
                else:
                    buf += ig
        return store


def check_gradients(f, params, epsilon=1e-4, loss_only=None):
    """Worst relative error between tape gradients and central differences.

    ``f(params)`` must deterministically return ``(loss, grads)`` where
    ``grads`` maps each key of ``params`` to an array of matching shape.
    ``loss_only``, if given, is a cheaper callable returning just the
    loss, used for the finite-difference probes. Complex parameters are
    perturbed one real coordinate at a time via a float view.
    """
    _, grads = f(params)
    probe = loss_only if loss_only is not None else (lambda p: f(p)[0])
    worst = 0.0
    for pid, arr in params.items():
        grad = np.asarray(grads[pid])
        if np.iscomplexobj(arr):
            pview = arr.view(np.float64).ravel()
            gview = grad.view(np.float64).ravel()
        else:
            pview = arr.ravel()
            gview = grad.ravel()
        for j in range(pview.size):
            orig = pview[j]
            pview[j] = orig + epsilon
            lp = float(probe(params))
            pview[j] = orig - epsilon
            lm = float(probe(params))
            pview[j] = orig
            numeric = (lp - lm) / (2.0 * epsilon)
            analytic = gview[j]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
