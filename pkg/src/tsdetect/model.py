"""Transformer encoder with 1D relative position bias for window scoring.

A window X of shape N x D is cut into M = N/p patches, linearly embedded,
passed through L pre-norm transformer layers whose attention logits carry a
learnable Toeplitz bias, and mapped by a shared 2-layer MLP head to N
per-timestamp scores in (0, 1).
"""

import io
import json
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, ShapeError


@dataclass(frozen=True)
class ModelConfig:
    data_dim: int
    window_size: int = 100
    patch_size: int = 1
    embed_dim: int = 256
    num_layers: int = 3
    num_heads: int = 8
    mlp_hidden: int = 1024

    def __post_init__(self):
        if self.window_size % self.patch_size != 0:
            raise ValueError("window_size must be divisible by patch_size")
        if self.embed_dim % self.num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")

    @property
    def num_features(self):
        """M: embedded sequence length."""
        return self.window_size // self.patch_size

    @property
    def head_dim(self):
        return self.embed_dim // self.num_heads


def simplified_config(data_dim):
    """Desk-scale preset: half embedding width, half depth, window 100, patch 1."""
    return ModelConfig(data_dim=data_dim, window_size=100, patch_size=1,
                       embed_dim=256, num_layers=3, num_heads=8, mlp_hidden=1024)


def full_config(data_dim, window_size, patch_size):
    """Full-scale preset: 6 layers, embedding 512, 8 heads, MLP hidden 2048."""
    return ModelConfig(data_dim=data_dim, window_size=window_size,
                       patch_size=patch_size, embed_dim=512, num_layers=6,
                       num_heads=8, mlp_hidden=2048)


def init_params(config, seed=0):
    """Initialize all learnable tensors.

    Linear weights uniform in +-1/sqrt(fan_in), linear biases zero, bias
    tables zero (attention starts unbiased), LN gamma=1 / beta=0.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    params = {}

    def linear(name, fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        params[f"{name}.weight"] = Tensor(
            rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)
        params[f"{name}.bias"] = Tensor(np.zeros(fan_out), requires_grad=True)

    c = config
    linear("embed", c.patch_size * c.data_dim, c.embed_dim)
    for i in range(c.num_layers):
        pre = f"layer{i}"
        params[f"{pre}.ln1.gamma"] = Tensor(np.ones(c.embed_dim), requires_grad=True)
        params[f"{pre}.ln1.beta"] = Tensor(np.zeros(c.embed_dim), requires_grad=True)
        linear(f"{pre}.qkv", c.embed_dim, 3 * c.embed_dim)
        params[f"{pre}.bias_table"] = Tensor(
            np.zeros((c.num_heads, 2 * c.num_features - 1)), requires_grad=True)
        linear(f"{pre}.proj", c.embed_dim, c.embed_dim)
        params[f"{pre}.ln2.gamma"] = Tensor(np.ones(c.embed_dim), requires_grad=True)
        params[f"{pre}.ln2.beta"] = Tensor(np.zeros(c.embed_dim), requires_grad=True)
        linear(f"{pre}.mlp1", c.embed_dim, c.mlp_hidden)
        linear(f"{pre}.mlp2", c.mlp_hidden, c.embed_dim)
    params["final_ln.gamma"] = Tensor(np.ones(c.embed_dim), requires_grad=True)
    params["final_ln.beta"] = Tensor(np.zeros(c.embed_dim), requires_grad=True)
    linear("head1", c.embed_dim, c.mlp_hidden)
    linear("head2", c.mlp_hidden, c.patch_size)
    return params


def _bias_index(m):
    """Index matrix mapping table slot (j - i) + (M-1) to position (i, j)."""
    i = np.arange(m)
    return (i[None, :] - i[:, None]) + (m - 1)


def relative_bias_matrix(table, m):
    """Expand a length 2M-1 bias table into the Toeplitz M x M bias matrix.

    B[i, j] = table[j - i + M - 1]; also accepts a stacked (H, 2M-1) table,
    yielding (H, M, M).
    """
    table = table if isinstance(table, Tensor) else Tensor(table)
    if table.data.shape[-1] != 2 * m - 1:
        raise ShapeError(f"bias table must have length {2 * m - 1}")
    return ad.gather_last(table, _bias_index(m))


def embed_window(window, params, config):
    """Project each non-overlapping patch of p timestamps to an embedding."""
    out = embed_batch(_as_batch(window, config), params, config)
    return Tensor(out.data[0])


def attention_head(q, k, v, bias):
    """Single-head attention: softmax(Q K^T / sqrt(d) + B) V."""
    q = q if isinstance(q, Tensor) else Tensor(q)
    k = k if isinstance(k, Tensor) else Tensor(k)
    v = v if isinstance(v, Tensor) else Tensor(v)
    bias = bias if isinstance(bias, Tensor) else Tensor(bias)
    d = q.data.shape[-1]
    scores = ad.add(ad.mul(ad.matmul(q, transpose_last(k)), 1.0 / np.sqrt(d)), bias)
    return ad.matmul(ad.softmax_rows(scores), v)


def transpose_last(t):
    axes = list(range(t.data.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return ad.transpose(t, tuple(axes))


def _linear(x, params, name):
    # collapse leading axes so the weight product is a single 2D GEMM
    shape = x.data.shape
    w = params[f"{name}.weight"]
    flat = ad.reshape(x, (-1, shape[-1]))
    out = ad.add(ad.matmul(flat, w), params[f"{name}.bias"])
    return ad.reshape(out, shape[:-1] + (w.data.shape[-1],))


def embed_batch(windows, params, config):
    """(B, N, D) -> (B, M, E)."""
    b = windows.data.shape[0]
    c = config
    patches = ad.reshape(windows, (b, c.num_features, c.patch_size * c.data_dim))
    return _linear(patches, params, "embed")


def transformer_layer(x, params, config, layer):
    """Pre-norm layer: x + MSA(LN(x)) then x + MLP(LN(x)). x is (B, M, E)."""
    c = config
    b, m, e = x.data.shape
    h, d = c.num_heads, c.head_dim
    pre = f"layer{layer}"

    normed = ad.layer_norm(x, params[f"{pre}.ln1.gamma"], params[f"{pre}.ln1.beta"])
    qkv = _linear(normed, params, f"{pre}.qkv")

    def heads(t):
        return ad.transpose(ad.reshape(t, (b, m, h, d)), (0, 2, 1, 3))

    q = heads(ad.slice_last(qkv, 0, e))
    k = heads(ad.slice_last(qkv, e, 2 * e))
    v = heads(ad.slice_last(qkv, 2 * e, 3 * e))

    bias = relative_bias_matrix(params[f"{pre}.bias_table"], m)  # (H, M, M)
    scores = ad.add(ad.mul(ad.matmul(q, transpose_last(k)), 1.0 / np.sqrt(d)), bias)
    attended = ad.matmul(ad.softmax_rows(scores), v)             # (B, H, M, d)
    merged = ad.reshape(ad.transpose(attended, (0, 2, 1, 3)), (b, m, e))
    x = ad.add(x, _linear(merged, params, f"{pre}.proj"))

    normed = ad.layer_norm(x, params[f"{pre}.ln2.gamma"], params[f"{pre}.ln2.beta"])
    hidden = ad.gelu(_linear(normed, params, f"{pre}.mlp1"))
    return ad.add(x, _linear(hidden, params, f"{pre}.mlp2"))


def predict_scores(latent, params, config):
    """(B, M, E) latents -> (B, N) scores via the shared 2-layer MLP head.

    A final layer norm precedes the head (LN before each module, pre-norm
    convention); it also keeps the head's input bounded for inputs far
    outside the training range.
    """
    b, m, _ = latent.data.shape
    latent = ad.layer_norm(latent, params["final_ln.gamma"],
                           params["final_ln.beta"])
    hidden = ad.gelu(_linear(latent, params, "head1"))
    logits = _linear(hidden, params, "head2")  # (B, M, p)
    return ad.sigmoid(ad.reshape(logits, (b, m * config.patch_size)))


def forward_batch(windows, params, config):
    """(B, N, D) windows -> (B, N) anomaly scores, differentiable."""
    windows = windows if isinstance(windows, Tensor) else Tensor(windows)
    if windows.data.ndim != 3 or windows.data.shape[1:] != (config.window_size,
                                                            config.data_dim):
        raise ShapeError(
            f"expected (B, {config.window_size}, {config.data_dim}) windows, "
            f"got {windows.data.shape}")
    x = embed_batch(windows, params, config)
    for i in range(config.num_layers):
        x = transformer_layer(x, params, config, i)
    return predict_scores(x, params, config)


def forward(window, params, config):
    """Single window (N, D) -> (N,) scores, differentiable."""
    return ad.reshape(forward_batch(_as_batch(window, config), params, config),
                      (config.window_size,))


def _as_batch(window, config):
    w = window.data if isinstance(window, Tensor) else np.asarray(window, dtype=np.float64)
    if w.shape != (config.window_size, config.data_dim):
        raise ShapeError(
            f"expected ({config.window_size}, {config.data_dim}) window, got {w.shape}")
    t = Tensor(w[None, :, :])
    if isinstance(window, Tensor):
        t = ad.reshape(window, (1,) + w.shape)
    return t


def save_checkpoint(path, params, config, extra=None):
    """Write config + all named parameter tensors (and optional extra arrays).

    Round-trips bit-exactly: float64 arrays are stored verbatim in npz.
    """
    meta = {"config": asdict(config)}
    if extra:
        meta["extra_keys"] = sorted(extra)
    arrays = {f"param/{k}": v.data for k, v in params.items()}
    if extra:
        arrays.update({f"extra/{k}": np.asarray(v) for k, v in extra.items()})
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path):
    """Returns (params, config, extra)."""
    with np.load(path) as z:
        meta = json.loads(bytes(z["__meta__"]).decode("utf-8"))
        config = ModelConfig(**meta["config"])
        params = {}
        extra = {}
        for key in z.files:
            if key.startswith("param/"):
                params[key[len("param/"):]] = Tensor(z[key], requires_grad=True)
            elif key.startswith("extra/"):
                extra[key[len("extra/"):]] = z[key]
    return params, config, extra
