"""AdamW with decoupled weight decay, global-norm clipping, warmup+cosine lr."""

import math
from dataclasses import dataclass, field

import numpy as np


class TrainingError(RuntimeError):
    """Raised when training hits a non-finite gradient or loss."""


@dataclass
class OptimizerState:
    """Per-parameter Adam moments plus step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def ensure(self, params):
        for name, p in params.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)


def adamw_step(params, state, lr):
    """One AdamW update in place. `params` maps name -> Tensor with .grad set.

    Weight decay is decoupled: theta <- theta - lr*wd*theta, applied on top of
    the bias-corrected Adam update.
    """
    state.ensure(params)
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if not np.isfinite(np.sum(g)):
            raise TrainingError(f"non-finite gradient for '{name}' at step {t}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.data -= lr * update
        if state.weight_decay:
            p.data -= lr * state.weight_decay * p.data


def global_grad_norm(params):
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            flat = p.grad.ravel()
            total += float(np.dot(flat, flat))
    return math.sqrt(total)


def clip_grad_norm(params, max_norm):
    """Scale all gradients so the global L2 norm is at most `max_norm`.

    Returns the pre-clip global norm.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm


def lr_at_step(step, total, base_lr, warmup_frac):
    """Linear warmup from 0 over warmup_frac*total steps, then cosine decay to 0."""
    if not 0 <= step <= total:
        raise ValueError(f"step {step} outside [0, {total}]")
    warmup = warmup_frac * total
    if step < warmup:
        return base_lr * step / warmup
    if total == warmup:
        return base_lr
    tau = (step - warmup) / (total - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * tau))
