"""Differentiable network layers with exact forward/backward passes.

Feature tensors are numpy float arrays of shape (height, width,
channels); batched variants carry a leading sample axis.  Layers are
functional: ``forward`` returns ``(output, cache)`` and ``backward``
consumes that cache, so concurrent evaluations of one layer never share
mutable state.

Convolution layers apply every filter to every input channel
independently; input channel c under filter f lands on output channel
``c * filters + f``, giving ``d * k`` output channels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .pqc import build_circuit, circuit_stages, encode_batch
from .statevector import parity_signs, ry_amplitudes


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window geometry: size, stride, and zero padding per edge."""

    height: int
    width: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"window size must be >= 1, got {self.height}x{self.width}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")

    @property
    def area(self) -> int:
        return self.height * self.width


def output_shape(input_shape, window: WindowSpec, filters: int = 1) -> tuple[int, int, int]:
    """Output (rows, cols, channels) of a window pass; rejects non-tiling strides."""
    v, h, d = input_shape
    if filters < 1:
        raise ValueError(f"filters must be >= 1, got {filters}")
    rows_span = v + 2 * window.padding - window.height
    cols_span = h + 2 * window.padding - window.width
    if rows_span < 0 or cols_span < 0:
        raise ValueError(f"window {window.height}x{window.width} larger than padded input {input_shape}")
    if rows_span % window.stride or cols_span % window.stride:
        raise ValueError(
            f"stride {window.stride} does not tile input {input_shape} "
            f"with window {window.height}x{window.width}, padding {window.padding}"
        )
    return (rows_span // window.stride + 1, cols_span // window.stride + 1, d * filters)


class WindowPatch(NamedTuple):
    row: int
    col: int
    channel: int
    values: np.ndarray


def extract_windows(tensor: np.ndarray, window: WindowSpec) -> list[WindowPatch]:
    """Enumerate windows channel by channel, left-to-right then top-to-bottom."""
    x = np.asarray(tensor, dtype=np.float64)
    rows, cols, _ = output_shape(x.shape, window)
    p, s = window.padding, window.stride
    if p:
        x = np.pad(x, ((p, p), (p, p), (0, 0)))
    out = []
    for c in range(x.shape[2]):
        for i in range(rows):
            for j in range(cols):
                patch = x[i * s : i * s + window.height, j * s : j * s + window.width, c]
                out.append(WindowPatch(i, j, c, patch.copy()))
    return out


def _batched_windows(xb: np.ndarray, window: WindowSpec) -> np.ndarray:
    """All windows of a batch as (samples, channels, rows, cols, m, n)."""
    p, s = window.padding, window.stride
    if p:
        xb = np.pad(xb, ((0, 0), (p, p), (p, p), (0, 0)))
    win = sliding_window_view(xb, (window.height, window.width), axis=(1, 2))
    win = win[:, ::s, ::s]  # (S, rows, cols, d, m, n)
    return np.moveaxis(win, 3, 1)


def _scatter_windows(dwin: np.ndarray, window: WindowSpec, input_shape) -> np.ndarray:
    """Overlap-add per-window input gradients back onto the input tensor."""
    samples, d, rows, cols, m, n = dwin.shape
    _, v, h, _ = input_shape
    p, s = window.padding, window.stride
    dxp = np.zeros((samples, v + 2 * p, h + 2 * p, d))
    for i in range(rows):
        for j in range(cols):
            dxp[:, i * s : i * s + m, j * s : j * s + n, :] += np.moveaxis(
                dwin[:, :, i, j], 1, 3
            )
    return dxp[:, p : p + v, p : p + h, :] if p else dxp


def _split_channels(up: np.ndarray, d: int, filters: int) -> np.ndarray:
    """Upstream (S, rows, cols, d*k) -> (S, d, rows, cols, k)."""
    s, rows, cols, _ = up.shape
    return np.moveaxis(up.reshape(s, rows, cols, d, filters), 3, 1)


def _merge_channels(feats: np.ndarray) -> np.ndarray:
    """(S, d, rows, cols, k) -> output tensor (S, rows, cols, d*k)."""
    s, d, rows, cols, k = feats.shape
    return np.moveaxis(feats, 1, 3).reshape(s, rows, cols, d * k)


def _pulled_back_observables(tails: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Parity observable conjugated through circuit tails: T^T diag(signs) T, batched."""
    return np.matmul(np.swapaxes(tails, -1, -2), signs[:, None] * tails)


def _shift_difference_forms(observables: np.ndarray, n_qubits: int) -> np.ndarray:
    """Quadratic forms whose value at state x is f(x; +pi/4) - f(x; -pi/4).

    For the exact quarter-turn shift, the difference of the two
    sandwiched observables collapses to the commutator [K, J_q], where
    J_q is the Ry generator on qubit q (J_q equals Ry(pi/2) there).
    Input is a (..., dim, dim) observable stack; the output gains a
    qubit axis: (..., n_qubits, dim, dim).  Forms are symmetric.
    """
    quarter_turn = np.pi / 2.0
    out = np.empty(observables.shape[:-2] + (n_qubits,) + observables.shape[-2:])
    swapped = np.swapaxes(observables, -1, -2)
    for q in range(n_qubits):
        k_j = -ry_amplitudes(observables, n_qubits, q, quarter_turn)
        j_k = np.swapaxes(ry_amplitudes(swapped, n_qubits, q, quarter_turn), -1, -2)
        out[..., q, :, :] = k_j - j_k
    return out


class QuantumConv:
    """Convolution whose feature map is the parametric quantum circuit.

    Each output cell is the Z-parity expectation of the circuit run on
    the encoded window, so cells lie in [-1, 1] and no extra
    nonlinearity is applied.  Backward evaluates the exact
    parameter-shift difference for every (window, angle) pair; the
    shifted evaluations are folded into per-angle quadratic forms over
    the encoded windows, so the whole layer gradient is a handful of
    matrix products instead of per-window circuit reruns.  Equality
    with the per-window rule is pinned by tests.
    """

    def __init__(self, window: WindowSpec, filters: int, depth: int, rng: np.random.Generator):
        if filters < 1:
            raise ValueError(f"filters must be >= 1, got {filters}")
        self.window = window
        self.filters = filters
        self.circuit = build_circuit(window.area, depth)
        self.angles = rng.uniform(0.0, 2.0 * np.pi, size=(filters, self.circuit.param_count))

    @property
    def params(self) -> list[np.ndarray]:
        return [self.angles]

    def out_shape(self, input_shape):
        return output_shape(input_shape, self.window, self.filters)

    def forward(self, xb: np.ndarray):
        win = _batched_windows(xb, self.window)
        s, d, rows, cols = win.shape[:4]
        wvals = win.reshape(-1, self.window.area)
        enc = encode_batch(wvals)
        dim = enc.shape[1]
        signs = parity_signs(self.circuit.n_qubits)
        stages = [circuit_stages(self.circuit, a) for a in self.angles]
        evolved = enc @ np.concatenate([st.unitary.T for st in stages], axis=1)
        feats = (evolved * evolved).reshape(enc.shape[0], self.filters, dim) @ signs
        out = _merge_channels(feats.reshape(s, d, rows, cols, self.filters))
        cache = {"enc": enc, "stages": stages, "dims": (s, d, rows, cols), "in_shape": xb.shape}
        return out, cache

    def backward(self, upstream: np.ndarray, cache, need_input_grad: bool = True):
        s, d, rows, cols = cache["dims"]
        enc, stages = cache["enc"], cache["stages"]
        n = self.circuit.n_qubits
        dim = enc.shape[1]
        depth = self.circuit.depth
        signs = parity_signs(n)
        u = _split_channels(upstream, d, self.filters).reshape(-1, self.filters)
        # x^T F x for every window x and form F, via one product against x (x) x
        pair_products = (enc[:, :, None] * enc[:, None, :]).reshape(-1, dim * dim)

        dangles = np.zeros_like(self.angles)
        if depth:
            forms = np.empty((self.filters, depth, n, dim, dim))
            for f, st in enumerate(stages):
                pres = np.stack(st.pre)
                comms = _shift_difference_forms(
                    _pulled_back_observables(np.stack(st.post), signs), n
                )
                # conjugate each form through the circuit head so it acts
                # directly on the encoded window
                forms[f] = np.matmul(
                    np.swapaxes(pres, -1, -2)[:, None], np.matmul(comms, pres[:, None])
                )
            shift_diffs = pair_products @ forms.reshape(-1, dim * dim).T
            dangles = (shift_diffs.reshape(-1, self.filters, depth * n) * u[:, :, None]).sum(axis=0)

        dx = None
        if need_input_grad:
            comms = _shift_difference_forms(
                _pulled_back_observables(np.stack([st.unitary for st in stages]), signs), n
            )
            shift_diffs = pair_products @ comms.reshape(-1, dim * dim).T
            dwin = (shift_diffs.reshape(-1, self.filters, n) * u[:, :, None]).sum(axis=1)
            dwin = dwin.reshape(s, d, rows, cols, self.window.height, self.window.width)
            dx = _scatter_windows(dwin, self.window, cache["in_shape"])
        return [dangles], dx


class ClassicalConv:
    """Plain linear convolution, one m x n weight array per filter, no bias."""

    def __init__(self, window: WindowSpec, filters: int, rng: np.random.Generator,
                 relu: bool = True):
        if filters < 1:
            raise ValueError(f"filters must be >= 1, got {filters}")
        self.window = window
        self.filters = filters
        self.relu = relu
        bound = np.sqrt(6.0 / (window.area + filters))
        self.weights = rng.uniform(-bound, bound, size=(filters, window.height, window.width))

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights]

    def out_shape(self, input_shape):
        return output_shape(input_shape, self.window, self.filters)

    def forward(self, xb: np.ndarray):
        win = _batched_windows(xb, self.window)
        z = np.einsum("sdijmn,fmn->sdijf", win, self.weights)
        out = _merge_channels(np.maximum(z, 0.0) if self.relu else z)
        cache = {"win": win, "z": z, "in_shape": xb.shape}
        return out, cache

    def backward(self, upstream: np.ndarray, cache, need_input_grad: bool = True):
        win, z = cache["win"], cache["z"]
        u = _split_channels(upstream, win.shape[1], self.filters)
        if self.relu:
            u = u * (z > 0.0)  # subgradient 0 at exactly 0
        dw = np.einsum("sdijf,sdijmn->fmn", u, win)
        dx = None
        if need_input_grad:
            dwin = np.einsum("sdijf,fmn->sdijmn", u, self.weights)
            dx = _scatter_windows(dwin, self.window, cache["in_shape"])
        return [dw], dx


class MaxPool:
    """Per-channel max over each window; zero padding competes in the max."""

    def __init__(self, window: WindowSpec):
        self.window = window

    @property
    def params(self) -> list[np.ndarray]:
        return []

    def out_shape(self, input_shape):
        return output_shape(input_shape, self.window)

    def forward(self, xb: np.ndarray):
        rows, cols, d = output_shape(xb.shape[1:], self.window)
        p, s = self.window.padding, self.window.stride
        m, n = self.window.height, self.window.width
        xp = np.pad(xb, ((0, 0), (p, p), (p, p), (0, 0))) if p else xb
        samples = xb.shape[0]
        out = np.empty((samples, rows, cols, d))
        argmax = np.empty((samples, rows, cols, d), dtype=np.int64)
        for i in range(rows):
            for j in range(cols):
                patch = xp[:, i * s : i * s + m, j * s : j * s + n, :].reshape(samples, m * n, d)
                idx = patch.argmax(axis=1)  # first occurrence wins ties, row-major
                argmax[:, i, j, :] = idx
                out[:, i, j, :] = np.take_along_axis(patch, idx[:, None, :], axis=1)[:, 0, :]
        cache = {"argmax": argmax, "in_shape": xb.shape}
        return out, cache

    def backward(self, upstream: np.ndarray, cache, need_input_grad: bool = True):
        if not need_input_grad:
            return [], None
        samples, v, h, d = cache["in_shape"]
        p, s = self.window.padding, self.window.stride
        n = self.window.width
        argmax = cache["argmax"]
        rows, cols = argmax.shape[1:3]
        dxp = np.zeros((samples, v + 2 * p, h + 2 * p, d))
        s_idx = np.arange(samples)[:, None]
        d_idx = np.arange(d)[None, :]
        for i in range(rows):
            for j in range(cols):
                idx = argmax[:, i, j, :]
                np.add.at(dxp, (s_idx, i * s + idx // n, j * s + idx % n, d_idx), upstream[:, i, j, :])
        dx = dxp[:, p : p + v, p : p + h, :] if p else dxp
        return [], dx


class Dense:
    """Fully connected map to the class scores: y = W x + b, linear output."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        bound = np.sqrt(6.0 / (in_dim + out_dim))
        self.weights = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        self.bias = np.zeros(out_dim)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights, self.bias]

    def out_shape(self, input_shape):
        return (self.weights.shape[0],)

    def forward(self, xb: np.ndarray):
        flat = xb.reshape(xb.shape[0], -1)
        if flat.shape[1] != self.weights.shape[1]:
            raise ValueError(
                f"dense layer expects {self.weights.shape[1]} inputs, got {flat.shape[1]}"
            )
        out = flat @ self.weights.T + self.bias
        cache = {"flat": flat, "in_shape": xb.shape}
        return out, cache

    def backward(self, upstream: np.ndarray, cache, need_input_grad: bool = True):
        dw = upstream.T @ cache["flat"]
        db = upstream.sum(axis=0)
        dx = None
        if need_input_grad:
            dx = (upstream @ self.weights).reshape(cache["in_shape"])
        return [dw, db], dx


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean squared error over the class axis and its gradient in pred."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.size != t.size:
        raise ValueError(f"prediction has {p.size} entries, target has {t.size}")
    if p.size == 0:
        raise ValueError("empty prediction")
    diff = p - t
    return float(diff @ diff) / p.size, (2.0 / p.size) * diff


def mse_loss_batch(pred: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over samples of the per-sample MSE, plus its gradient in pred."""
    if pred.shape != targets.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {targets.shape}")
    diff = pred - targets
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


class Network:
    """Ordered layer stack ending in class scores, trained against one-hot MSE."""

    def __init__(self, layers: list, n_classes: int):
        self.layers = layers
        self.n_classes = n_classes

    @property
    def param_arrays(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer.params]

    def forward_batch(self, xb: np.ndarray):
        out = xb
        caches = []
        for layer in self.layers:
            out, cache = layer.forward(out)
            caches.append(cache)
        return out, caches

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Single-sample prediction for a (height, width, channels) tensor."""
        out, _ = self.forward_batch(np.asarray(x, dtype=np.float64)[None])
        return out[0]

    def backward_batch(self, dpred: np.ndarray, caches, need_input_grad: bool = False):
        grads: list[list[np.ndarray]] = [None] * len(self.layers)
        upstream = dpred
        for i in range(len(self.layers) - 1, -1, -1):
            want_dx = need_input_grad or i > 0
            layer_grads, upstream = self.layers[i].backward(upstream, caches[i], want_dx)
            grads[i] = layer_grads
        flat = [g for layer_grads in grads for g in layer_grads]
        return flat, upstream

    def loss_and_gradients(self, xb: np.ndarray, targets: np.ndarray):
        """Batch loss, flat parameter gradient, and predictions."""
        pred, caches = self.forward_batch(xb)
        loss, dpred = mse_loss_batch(pred, targets)
        grads, _ = self.backward_batch(dpred, caches)
        return loss, flatten_arrays(grads), pred

    def get_flat_params(self) -> np.ndarray:
        return flatten_arrays(self.param_arrays)

    def set_flat_params(self, flat: np.ndarray) -> None:
        arrays = self.param_arrays
        total = sum(a.size for a in arrays)
        if flat.size != total:
            raise ValueError(f"expected {total} parameters, got {flat.size}")
        offset = 0
        for a in arrays:
            a[...] = flat[offset : offset + a.size].reshape(a.shape)
            offset += a.size


def flatten_arrays(arrays: list[np.ndarray]) -> np.ndarray:
    """Stable flat ordering: layer order, then array order, C-order entries."""
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])
