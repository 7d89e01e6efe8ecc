"""Self-supervised training loop: sample -> degrade -> forward -> BCE ->
backward -> clip -> AdamW with warmup+cosine schedule."""

import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import window_starts
from .degradation import degrade
from .model import forward_batch, init_params, save_checkpoint
from .optim import OptimizerState, adamw_step, clip_grad_norm, lr_at_step, \
    TrainingError

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 16
    max_steps: int = 150000
    base_lr: float = 1e-4
    warmup_frac: float = 0.1
    clip_norm: float = 1.0
    weight_decay: float = 0.01
    seed: int = 0
    checkpoint_every: int = 1000
    keep_checkpoints: int = 3
    log_every: int = 100

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.warmup_frac < 1:
            raise ValueError("warmup_frac must be in (0, 1)")


def desk_config(**overrides):
    """Desk-scale defaults: 20K steps, batch 8."""
    return TrainConfig(**{"batch_size": 8, "max_steps": 20000, **overrides})


@dataclass
class TrainLog:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    lrs: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def append(self, step, loss, lr, grad_norm, seconds):
        self.steps.append(step)
        self.losses.append(loss)
        self.lrs.append(lr)
        self.grad_norms.append(grad_norm)
        self.seconds.append(seconds)

    def write_csv(self, path, append=False):
        mode = "a" if append and os.path.exists(path) else "w"
        with open(path, mode) as f:
            if mode == "w":
                f.write("step,loss,lr,grad_norm,seconds\n")
            for row in zip(self.steps, self.losses, self.lrs,
                           self.grad_norms, self.seconds):
                f.write("%d,%r,%r,%r,%r\n" % row)


def training_objective(scores, labels):
    """Mean BCE over the window scores with the artificial labels."""
    return ad.bce_loss(scores, np.asarray(labels, dtype=np.float64))


def _batch_rng(seed, step, index):
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(step, index)))


def make_batch(train_values, starts, n, degr_cfg, train_cfg, step):
    """Draw and degrade one mini-batch deterministically from (seed, step, i)."""
    windows = []
    labels = []
    for i in range(train_cfg.batch_size):
        rng = _batch_rng(train_cfg.seed, step, i)
        start = starts[int(rng.integers(0, len(starts)))]
        window = train_values[start:start + n]
        dw = degrade(window, train_values, degr_cfg, rng)
        windows.append(dw.values)
        labels.append(dw.labels)
    return np.stack(windows), np.stack(labels).astype(np.float64)


def train(model_cfg, train_data, train_cfg, degr_cfg, params=None,
          optimizer=None, start_step=0, checkpoint_dir=None, log_path=None):
    """Run the training loop; returns (params, TrainLog).

    Deterministic given the seed: per-item rng streams are derived from
    (seed, step, batch index), so results do not depend on batching order.
    Pass `params`/`optimizer`/`start_step` to resume from a checkpoint.
    """
    n = model_cfg.window_size
    starts = window_starts(train_data, n)
    if not starts:
        raise TrainingError(f"training data shorter than window size {n}")
    if params is None:
        params = init_params(model_cfg, seed=train_cfg.seed)
    if optimizer is None:
        optimizer = OptimizerState(weight_decay=train_cfg.weight_decay)
        optimizer.step = start_step
    log = TrainLog()
    kept = []
    t_start = time.time()

    for step in range(start_step, train_cfg.max_steps):
        windows, labels = make_batch(train_data.values, starts, n, degr_cfg,
                                     train_cfg, step)
        for p in params.values():
            p.zero_grad()
        scores = forward_batch(windows, params, model_cfg)
        loss = training_objective(scores, labels)
        loss_value = float(loss.data)
        if not np.isfinite(loss_value):
            raise TrainingError(f"non-finite loss at step {step}")
        loss.backward()
        grad_norm = clip_grad_norm(params, train_cfg.clip_norm)
        lr = lr_at_step(step, train_cfg.max_steps, train_cfg.base_lr,
                        train_cfg.warmup_frac)
        adamw_step(params, optimizer, lr)

        if step % train_cfg.log_every == 0 or step == train_cfg.max_steps - 1:
            log.append(step, loss_value, lr, grad_norm, time.time() - t_start)
            logger.info("step %d loss %.4f lr %.2e grad %.3f",
                        step, loss_value, lr, grad_norm)
        if checkpoint_dir and (step + 1) % train_cfg.checkpoint_every == 0:
            path = os.path.join(checkpoint_dir, f"ckpt_{step + 1:07d}.npz")
            save_checkpoint(path, params, model_cfg,
                            extra=_optimizer_extra(optimizer))
            kept.append(path)
            while len(kept) > train_cfg.keep_checkpoints:
                os.remove(kept.pop(0))
        if log_path and ((step + 1) % (train_cfg.log_every * 10) == 0
                         or step == train_cfg.max_steps - 1):
            log.write_csv(log_path, append=False)
    if log_path:
        log.write_csv(log_path, append=False)
    return params, log


def _optimizer_extra(optimizer):
    extra = {"opt/step": np.asarray(optimizer.step)}
    for name, m in optimizer.m.items():
        extra[f"opt/m/{name}"] = m
        extra[f"opt/v/{name}"] = optimizer.v[name]
    return extra


def optimizer_from_extra(extra, weight_decay=0.01):
    """Rebuild OptimizerState from checkpoint extras; None if absent."""
    if "opt/step" not in extra:
        return None
    state = OptimizerState(weight_decay=weight_decay,
                           step=int(extra["opt/step"]))
    for key, arr in extra.items():
        if key.startswith("opt/m/"):
            state.m[key[len("opt/m/"):]] = np.array(arr)
        elif key.startswith("opt/v/"):
            state.v[key[len("opt/v/"):]] = np.array(arr)
    return state
