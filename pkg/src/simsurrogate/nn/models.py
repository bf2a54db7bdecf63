"""Sequence models: stacked bidirectional GRU/LSTM and an encoder-only
transformer, all per-position regression heads over fixed-size windows."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from ..errors import ModelConfigError
from .autodiff import Tensor, concat, softmax, stack

ARCHITECTURES = ("bigru", "bilstm", "transformer")


@dataclass
class ModelConfig:
    architecture: str
    input_dim: int
    output_dim: int
    hidden_size: int = 32
    num_layers: int = 1
    window_size: int = 16
    window_overlap: int = 0
    batch_size: int = 32
    num_heads: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ModelConfigError(f"unknown architecture {self.architecture!r}")
        if self.hidden_size < 1 or self.num_layers < 1:
            raise ModelConfigError("hidden_size and num_layers must be positive")
        if not 0 <= self.window_overlap < self.window_size:
            raise ModelConfigError("window_overlap must be < window_size")
        if self.architecture == "transformer" and self.hidden_size % self.num_heads != 0:
            raise ModelConfigError(
                f"hidden_size {self.hidden_size} not divisible by num_heads {self.num_heads}"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        return cls(**doc)


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def _gate_params(rng, prefix: str, in_dim: int, hidden: int, gates: tuple[str, ...],
                 params: dict) -> None:
    for gate in gates:
        params[f"{prefix}.W{gate}"] = _uniform(rng, in_dim, (in_dim, hidden))
        params[f"{prefix}.U{gate}"] = _uniform(rng, hidden, (hidden, hidden))
        params[f"{prefix}.b{gate}"] = _uniform(rng, hidden, (hidden,))


def init_params(config: ModelConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    h = config.hidden_size
    params: dict[str, np.ndarray] = {
        "embed.W": _uniform(rng, config.input_dim, (config.input_dim, h)),
        "embed.b": _uniform(rng, config.input_dim, (h,)),
    }
    if config.architecture in ("bigru", "bilstm"):
        gates = ("z", "r", "h") if config.architecture == "bigru" else ("i", "f", "o", "g")
        for layer in range(config.num_layers):
            in_dim = h if layer == 0 else 2 * h
            for direction in ("fwd", "bwd"):
                _gate_params(rng, f"rnn{layer}.{direction}", in_dim, h, gates, params)
        out_in = 2 * h
    else:
        for layer in range(config.num_layers):
            p = f"enc{layer}"
            for name in ("q", "k", "v", "o"):
                params[f"{p}.W{name}"] = _uniform(rng, h, (h, h))
                params[f"{p}.b{name}"] = _uniform(rng, h, (h,))
            params[f"{p}.ln1.g"] = np.ones(h)
            params[f"{p}.ln1.b"] = np.zeros(h)
            params[f"{p}.ln2.g"] = np.ones(h)
            params[f"{p}.ln2.b"] = np.zeros(h)
            params[f"{p}.ff.W1"] = _uniform(rng, h, (h, 4 * h))
            params[f"{p}.ff.b1"] = _uniform(rng, h, (4 * h,))
            params[f"{p}.ff.W2"] = _uniform(rng, 4 * h, (4 * h, h))
            params[f"{p}.ff.b2"] = _uniform(rng, 4 * h, (h,))
        params["final_ln.g"] = np.ones(h)
        params["final_ln.b"] = np.zeros(h)
        out_in = h
    params["out.W"] = _uniform(rng, out_in, (out_in, config.output_dim))
    params["out.b"] = _uniform(rng, out_in, (config.output_dim,))
    return params


def wrap_params(params: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=True) for k, v in params.items()}


def linear_forward(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    if x.shape[-1] != w.shape[0]:
        raise ModelConfigError(f"linear shape mismatch: {x.shape} @ {w.shape}")
    return x @ w + b


def gru_cell(x_t: Tensor, h_prev: Tensor, p: dict[str, Tensor], prefix: str) -> Tensor:
    z = (x_t @ p[f"{prefix}.Wz"] + h_prev @ p[f"{prefix}.Uz"] + p[f"{prefix}.bz"]).sigmoid()
    r = (x_t @ p[f"{prefix}.Wr"] + h_prev @ p[f"{prefix}.Ur"] + p[f"{prefix}.br"]).sigmoid()
    cand = (x_t @ p[f"{prefix}.Wh"] + (r * h_prev) @ p[f"{prefix}.Uh"] + p[f"{prefix}.bh"]).tanh()
    return (1.0 - z) * h_prev + z * cand


def lstm_cell(x_t: Tensor, state: tuple[Tensor, Tensor], p: dict[str, Tensor],
              prefix: str) -> tuple[Tensor, Tensor]:
    h_prev, c_prev = state
    i = (x_t @ p[f"{prefix}.Wi"] + h_prev @ p[f"{prefix}.Ui"] + p[f"{prefix}.bi"]).sigmoid()
    f = (x_t @ p[f"{prefix}.Wf"] + h_prev @ p[f"{prefix}.Uf"] + p[f"{prefix}.bf"]).sigmoid()
    o = (x_t @ p[f"{prefix}.Wo"] + h_prev @ p[f"{prefix}.Uo"] + p[f"{prefix}.bo"]).sigmoid()
    g = (x_t @ p[f"{prefix}.Wg"] + h_prev @ p[f"{prefix}.Ug"] + p[f"{prefix}.bg"]).tanh()
    c_t = f * c_prev + i * g
    h_t = o * c_t.tanh()
    return h_t, c_t


def _run_direction(x: Tensor, p: dict[str, Tensor], prefix: str, hidden: int,
                   kind: str, reverse: bool) -> list[Tensor]:
    batch, seq_len = x.shape[0], x.shape[1]
    h = Tensor(np.zeros((batch, hidden)))
    c = Tensor(np.zeros((batch, hidden)))
    order = range(seq_len - 1, -1, -1) if reverse else range(seq_len)
    outputs: list[Tensor | None] = [None] * seq_len
    for t in order:
        x_t = x[:, t, :]
        if kind == "bigru":
            h = gru_cell(x_t, h, p, prefix)
        else:
            h, c = lstm_cell(x_t, (h, c), p, prefix)
        outputs[t] = h
    return outputs  # type: ignore[return-value]


def bidirectional_forward(x: Tensor, p: dict[str, Tensor], layer_prefix: str,
                          hidden: int, kind: str) -> Tensor:
    """[batch, T, in] -> [batch, T, 2*hidden], fwd/bwd halves concatenated."""
    if x.shape[1] < 1:
        raise ModelConfigError("empty sequence")
    fwd = _run_direction(x, p, f"{layer_prefix}.fwd", hidden, kind, reverse=False)
    bwd = _run_direction(x, p, f"{layer_prefix}.bwd", hidden, kind, reverse=True)
    per_step = [concat([fwd[t], bwd[t]], axis=-1) for t in range(x.shape[1])]
    return stack(per_step, axis=1)


def layer_norm(x: Tensor, g: Tensor, b: Tensor, eps: float = 1e-6) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / (var + eps).sqrt() * g + b


def _gelu(x: Tensor) -> Tensor:
    # tanh approximation; smooth, so finite-difference checks stay tight
    inner = 0.7978845608028654 * (x + 0.044715 * (x * x * x))
    return 0.5 * x * (1.0 + inner.tanh())


def multi_head_attention(x: Tensor, p: dict[str, Tensor], prefix: str,
                         num_heads: int, mask: np.ndarray | None = None) -> Tensor:
    """Bidirectional scaled dot-product attention; padded keys get zero weight."""
    batch, seq_len, d = x.shape
    if d % num_heads != 0:
        raise ModelConfigError(f"model dim {d} not divisible by {num_heads} heads")
    d_head = d // num_heads

    def split_heads(t: Tensor) -> Tensor:
        return t.reshape(batch, seq_len, num_heads, d_head).transpose((0, 2, 1, 3))

    q = split_heads(x @ p[f"{prefix}.Wq"] + p[f"{prefix}.bq"])
    k = split_heads(x @ p[f"{prefix}.Wk"] + p[f"{prefix}.bk"])
    v = split_heads(x @ p[f"{prefix}.Wv"] + p[f"{prefix}.bv"])
    scores = (q @ k.transpose((0, 1, 3, 2))) * (1.0 / math.sqrt(d_head))
    if mask is not None:
        key_mask = np.asarray(mask, dtype=bool)[:, None, None, :]
        scores = scores.masked_fill(key_mask, -1e30)
    weights = softmax(scores, axis=-1)
    mixed = weights @ v  # [batch, heads, T, d_head]
    merged = mixed.transpose((0, 2, 1, 3)).reshape(batch, seq_len, d)
    return merged @ p[f"{prefix}.Wo"] + p[f"{prefix}.bo"]


def sinusoidal_encoding(seq_len: int, dim: int) -> np.ndarray:
    pos = np.arange(seq_len)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    enc = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return enc


def model_forward(config: ModelConfig, p: dict[str, Tensor], windows: np.ndarray,
                  mask: np.ndarray | None = None) -> Tensor:
    """Predictions [n_windows, window_size, output_dim] for a window batch."""
    x = Tensor(windows)
    if x.shape[-1] != config.input_dim:
        raise ModelConfigError(
            f"window feature dim {x.shape[-1]} != config.input_dim {config.input_dim}"
        )
    h = linear_forward(x, p["embed.W"], p["embed.b"])
    if config.architecture in ("bigru", "bilstm"):
        for layer in range(config.num_layers):
            h = bidirectional_forward(h, p, f"rnn{layer}", config.hidden_size,
                                      config.architecture)
    else:
        h = h + Tensor(sinusoidal_encoding(x.shape[1], config.hidden_size))
        for layer in range(config.num_layers):
            prefix = f"enc{layer}"
            normed = layer_norm(h, p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"])
            h = h + multi_head_attention(normed, p, prefix, config.num_heads, mask)
            normed = layer_norm(h, p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"])
            ff = _gelu(normed @ p[f"{prefix}.ff.W1"] + p[f"{prefix}.ff.b1"])
            h = h + (ff @ p[f"{prefix}.ff.W2"] + p[f"{prefix}.ff.b2"])
        h = layer_norm(h, p["final_ln.g"], p["final_ln.b"])
    return linear_forward(h, p["out.W"], p["out.b"])


# Inference-only forward pass ----------------------------------------------
#
# Plain-numpy mirror of model_forward with the per-gate matmuls fused, used
# where no gradients are needed (prediction, benchmarking).  Kept in sync by
# an equivalence test against the autodiff path.

def _np_sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _np_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _np_layer_norm(x, g, b, eps=1e-6):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + eps) * g + b


def _np_gelu(x):
    inner = 0.7978845608028654 * (x + 0.044715 * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def _infer_direction(x: np.ndarray, p: dict[str, np.ndarray], prefix: str,
                     hidden: int, kind: str, reverse: bool) -> np.ndarray:
    batch, seq_len = x.shape[0], x.shape[1]
    gates = ("z", "r", "h") if kind == "bigru" else ("i", "f", "o", "g")
    wx = np.concatenate([p[f"{prefix}.W{g}"] for g in gates], axis=1)
    bx = np.concatenate([p[f"{prefix}.b{g}"] for g in gates])
    x_proj = x @ wx + bx  # [batch, T, n_gates*hidden], one fused matmul
    out = np.empty((batch, seq_len, hidden))
    h = np.zeros((batch, hidden))
    order = range(seq_len - 1, -1, -1) if reverse else range(seq_len)
    if kind == "bigru":
        uzr = np.concatenate([p[f"{prefix}.Uz"], p[f"{prefix}.Ur"]], axis=1)
        uh = p[f"{prefix}.Uh"]
        for t in order:
            hu = h @ uzr
            z = _np_sigmoid(x_proj[:, t, :hidden] + hu[:, :hidden])
            r = _np_sigmoid(x_proj[:, t, hidden:2 * hidden] + hu[:, hidden:])
            cand = np.tanh(x_proj[:, t, 2 * hidden:] + (r * h) @ uh)
            h = (1.0 - z) * h + z * cand
            out[:, t] = h
    else:
        u = np.concatenate([p[f"{prefix}.U{g}"] for g in gates], axis=1)
        c = np.zeros((batch, hidden))
        for t in order:
            acts = x_proj[:, t] + h @ u
            i = _np_sigmoid(acts[:, :hidden])
            f = _np_sigmoid(acts[:, hidden:2 * hidden])
            o = _np_sigmoid(acts[:, 2 * hidden:3 * hidden])
            g = np.tanh(acts[:, 3 * hidden:])
            c = f * c + i * g
            h = o * np.tanh(c)
            out[:, t] = h
    return out


def model_forward_infer(config: ModelConfig, params: dict[str, np.ndarray],
                        windows: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Gradient-free forward pass; same outputs as model_forward."""
    x = np.asarray(windows, dtype=float)
    if x.shape[-1] != config.input_dim:
        raise ModelConfigError(
            f"window feature dim {x.shape[-1]} != config.input_dim {config.input_dim}"
        )
    h = x @ params["embed.W"] + params["embed.b"]
    hid = config.hidden_size
    if config.architecture in ("bigru", "bilstm"):
        for layer in range(config.num_layers):
            fwd = _infer_direction(h, params, f"rnn{layer}.fwd", hid,
                                   config.architecture, reverse=False)
            bwd = _infer_direction(h, params, f"rnn{layer}.bwd", hid,
                                   config.architecture, reverse=True)
            h = np.concatenate([fwd, bwd], axis=-1)
    else:
        batch, seq_len = x.shape[0], x.shape[1]
        d_head = hid // config.num_heads
        h = h + sinusoidal_encoding(seq_len, hid)
        key_mask = None if mask is None else np.asarray(mask, dtype=bool)[:, None, None, :]
        for layer in range(config.num_layers):
            pre = f"enc{layer}"
            normed = _np_layer_norm(h, params[f"{pre}.ln1.g"], params[f"{pre}.ln1.b"])

            def heads(t):
                return t.reshape(batch, seq_len, config.num_heads, d_head).transpose(0, 2, 1, 3)

            q = heads(normed @ params[f"{pre}.Wq"] + params[f"{pre}.bq"])
            k = heads(normed @ params[f"{pre}.Wk"] + params[f"{pre}.bk"])
            v = heads(normed @ params[f"{pre}.Wv"] + params[f"{pre}.bv"])
            scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(d_head))
            if key_mask is not None:
                scores = np.where(key_mask, scores, -1e30)
            mixed = _np_softmax(scores, axis=-1) @ v
            merged = mixed.transpose(0, 2, 1, 3).reshape(batch, seq_len, hid)
            h = h + (merged @ params[f"{pre}.Wo"] + params[f"{pre}.bo"])
            normed = _np_layer_norm(h, params[f"{pre}.ln2.g"], params[f"{pre}.ln2.b"])
            ff = _np_gelu(normed @ params[f"{pre}.ff.W1"] + params[f"{pre}.ff.b1"])
            h = h + (ff @ params[f"{pre}.ff.W2"] + params[f"{pre}.ff.b2"])
        h = _np_layer_norm(h, params["final_ln.g"], params["final_ln.b"])
    return h @ params["out.W"] + params["out.b"]
