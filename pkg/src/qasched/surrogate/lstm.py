"""Stacked LSTM with a logistic dense head, written directly in numpy.

Features are consumed as a sequence of scalar tokens (one per feature slot).
Gate weights are packed row-wise as [input; forget; candidate; output] blocks
of height H, so layer weights are w (4H x D_in), u (4H x H), b (4H,).
Inverted dropout acts on inter-layer hidden sequences only, in training mode;
the dense head reads the last hidden state of the top layer.

Everything here is deterministic given the seeds; backward() consumes the
exact dropout masks cached by the forward pass.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError

FORMAT_VERSION = 1


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LayerWeights:
    """One recurrent layer; also reused as the gradient container."""

    w: np.ndarray  # (4H, D_in)
    u: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def width(self) -> int:
        return self.u.shape[1]


@dataclass
class LstmModel:
    layers: list
    head_w: np.ndarray  # (n_outputs, H_last)
    head_b: np.ndarray  # (n_outputs,)
    dropout_rate: float
    format_version: int = FORMAT_VERSION

    @property
    def architecture(self) -> tuple:
        return tuple(layer.width for layer in self.layers)

    @property
    def n_outputs(self) -> int:
        return len(self.head_b)

    def copy(self) -> "LstmModel":
        return LstmModel([LayerWeights(l.w.copy(), l.u.copy(), l.b.copy())
                          for l in self.layers],
                         self.head_w.copy(), self.head_b.copy(),
                         self.dropout_rate, self.format_version)

    def parameters(self) -> list:
        """Flat list of weight arrays in a fixed order (Adam relies on it)."""
        params = []
        for layer in self.layers:
            params.extend([layer.w, layer.u, layer.b])
        params.extend([self.head_w, self.head_b])
        return params


def init_model(architecture, n_outputs: int = 500, dropout_rate: float = 0.2,
               seed: int = 0) -> LstmModel:
    """Glorot-uniform gates per block, zero biases with forget bias 1."""
    architecture = tuple(int(h) for h in architecture)
    if not architecture or any(h < 1 for h in architecture):
        raise ValueError("architecture must list positive layer widths")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must lie in [0, 1)")
    rng = np.random.default_rng(seed)

    def glorot(rows, cols, fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(rows, cols))

    layers = []
    d_in = 1
    for width in architecture:
        w = np.vstack([glorot(width, d_in, d_in, width) for _ in range(4)])
        u = np.vstack([glorot(width, width, width, width) for _ in range(4)])
        b = np.zeros(4 * width)
        b[width:2 * width] = 1.0  # forget gate opens at init
        layers.append(LayerWeights(w, u, b))
        d_in = width
    head_w = glorot(n_outputs, architecture[-1], architecture[-1], n_outputs)
    head_b = np.zeros(n_outputs)
    return LstmModel(layers, head_w, head_b, float(dropout_rate))


def lstm_cell_step(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
                   layer: LayerWeights) -> tuple[np.ndarray, np.ndarray]:
    """One gate update for a single (unbatched) timestep."""
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    hsz = layer.width
    z = layer.w @ x_t + layer.u @ h_prev + layer.b
    i = _sigmoid(z[:hsz])
    f = _sigmoid(z[hsz:2 * hsz])
    g = np.tanh(z[2 * hsz:3 * hsz])
    o = _sigmoid(z[3 * hsz:])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


def _run_layer(layer: LayerWeights, x_seq: np.ndarray):
    """Run one layer over a (T, B, D) input sequence; returns (T, B, H) and
    the per-timestep cache needed by backprop."""
    t_len, batch, _ = x_seq.shape
    hsz = layer.width
    h = np.zeros((batch, hsz))
    c = np.zeros((batch, hsz))
    h_seq = np.empty((t_len, batch, hsz))
    cache = {
        "x": x_seq,
        "i": np.empty((t_len, batch, hsz)), "f": np.empty((t_len, batch, hsz)),
        "g": np.empty((t_len, batch, hsz)), "o": np.empty((t_len, batch, hsz)),
        "tanh_c": np.empty((t_len, batch, hsz)),
        "h_prev": np.empty((t_len, batch, hsz)),
        "c_prev": np.empty((t_len, batch, hsz)),
    }
    for t in range(t_len):
        cache["h_prev"][t] = h
        cache["c_prev"][t] = c
        z = x_seq[t] @ layer.w.T + h @ layer.u.T + layer.b
        i = _sigmoid(z[:, :hsz])
        f = _sigmoid(z[:, hsz:2 * hsz])
        g = np.tanh(z[:, 2 * hsz:3 * hsz])
        o = _sigmoid(z[:, 3 * hsz:])
        c = f * c + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t] = i, f, g, o
        cache["tanh_c"][t] = tanh_c
        h_seq[t] = h
    return h_seq, cache


def forward_batch(model: LstmModel, tokens: np.ndarray,
                  training_mode: bool = False, dropout_seed: int = 0,
                  want_cache: bool = False):
    """Outputs (B, n_outputs) for a (B, T) token matrix.

    In training mode a fresh inverted-dropout mask is drawn per inter-layer
    boundary, timestep, and unit from dropout_seed.
    """
    tokens = np.asarray(tokens, dtype=float)
    if tokens.ndim != 2:
        raise ValueError("tokens must be a (batch, features) matrix")
    x_seq = tokens.T[:, :, None]  # (T, B, 1)
    rate = model.dropout_rate
    rng = np.random.default_rng(dropout_seed)
    layer_caches = []
    masks = []
    for idx, layer in enumerate(model.layers):
        h_seq, cache = _run_layer(layer, x_seq)
        mask = None
        if idx < len(model.layers) - 1:
            if training_mode and rate > 0.0:
                keep = rng.random(h_seq.shape) >= rate
                mask = keep / (1.0 - rate)
                x_seq = h_seq * mask
            else:
                x_seq = h_seq
        layer_caches.append(cache)
        masks.append(mask)
    h_last = h_seq[-1]
    z = h_last @ model.head_w.T + model.head_b
    out = _sigmoid(z)
    if not want_cache:
        return out
    cache = {"layers": layer_caches, "masks": masks, "h_last": h_last,
             "out": out, "top_h_seq": h_seq}
    return out, cache


def forward(model: LstmModel, features: np.ndarray,
            training_mode: bool = False, dropout_seed: int = 0) -> np.ndarray:
    """Single-instance forward pass; returns n_outputs values in (0, 1)."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 1:
        raise ValueError("features must be a 1-d vector")
    return forward_batch(model, features[None, :], training_mode, dropout_seed)[0]


def backward(model: LstmModel, cache: dict, d_out: np.ndarray) -> LstmModel:
    """Full backpropagation through time.

    d_out is the loss gradient at the head outputs, (B, n_outputs).  Returns
    gradients in a model-shaped container; dropout masks cached by the
    forward pass are reused, so train-mode gradients are exact for the
    sampled masks.
    """
    out = cache["out"]
    d_z = d_out * out * (1.0 - out)
    g_head_w = d_z.T @ cache["h_last"]
    g_head_b = d_z.sum(axis=0)

    t_len, batch, _ = cache["layers"][-1]["i"].shape
    top_width = model.layers[-1].width
    d_h_seq = np.zeros((t_len, batch, top_width))
    d_h_seq[-1] = d_z @ model.head_w

    grad_layers: list = [None] * len(model.layers)
    for idx in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[idx]
        lcache = cache["layers"][idx]
        d_x_seq, grads = _backprop_layer(layer, lcache, d_h_seq)
        grad_layers[idx] = grads
        if idx > 0:
            mask = cache["masks"][idx - 1]
            d_h_seq = d_x_seq if mask is None else d_x_seq * mask
    return LstmModel(grad_layers, g_head_w, g_head_b, model.dropout_rate)


def _backprop_layer(layer: LayerWeights, cache: dict, d_h_seq: np.ndarray):
    t_len, batch, hsz = d_h_seq.shape
    x = cache["x"]
    g_w = np.zeros_like(layer.w)
    g_u = np.zeros_like(layer.u)
    g_b = np.zeros_like(layer.b)
    d_x_seq = np.empty((t_len, batch, layer.w.shape[1]))
    d_h_next = np.zeros((batch, hsz))
    d_c_next = np.zeros((batch, hsz))
    for t in range(t_len - 1, -1, -1):
        i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
        tanh_c = cache["tanh_c"][t]
        d_h = d_h_seq[t] + d_h_next
        d_o = d_h * tanh_c
        d_c = d_c_next + d_h * o * (1.0 - tanh_c ** 2)
        d_f = d_c * cache["c_prev"][t]
        d_i = d_c * g
        d_g = d_c * i
        d_z = np.concatenate([
            d_i * i * (1.0 - i),
            d_f * f * (1.0 - f),
            d_g * (1.0 - g ** 2),
            d_o * o * (1.0 - o),
        ], axis=1)
        g_w += d_z.T @ x[t]
        g_u += d_z.T @ cache["h_prev"][t]
        g_b += d_z.sum(axis=0)
        d_x_seq[t] = d_z @ layer.w
        d_h_next = d_z @ layer.u
        d_c_next = d_c * f
    return d_x_seq, LayerWeights(g_w, g_u, g_b)


def save_model(model: LstmModel, path) -> None:
    """Versioned binary container; round trip is bit exact (float64 arrays)."""
    meta = {
        "format_version": model.format_version,
        "architecture": list(model.architecture),
        "n_outputs": model.n_outputs,
        "dropout_rate": model.dropout_rate,
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for k, layer in enumerate(model.layers):
        arrays[f"w{k}"] = layer.w
        arrays[f"u{k}"] = layer.u
        arrays[f"b{k}"] = layer.b
    arrays["head_w"] = model.head_w
    arrays["head_b"] = model.head_b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> LstmModel:
    try:
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format_version") != FORMAT_VERSION:
                raise FormatError(
                    f"unsupported checkpoint version {meta.get('format_version')!r}")
            layers = [LayerWeights(data[f"w{k}"], data[f"u{k}"], data[f"b{k}"])
                      for k in range(len(meta["architecture"]))]
            model = LstmModel(layers, data["head_w"], data["head_b"],
                              float(meta["dropout_rate"]),
                              int(meta["format_version"]))
    except FormatError:
        raise
    except (OSError, EOFError, ValueError, KeyError, zipfile.BadZipFile,
            json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable model checkpoint: {exc}") from exc
    expected = tuple(meta["architecture"])
    if model.architecture != expected or model.n_outputs != meta["n_outputs"]:
        raise FormatError("checkpoint arrays disagree with their manifest")
    return model
