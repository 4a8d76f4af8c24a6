"""Mini-batch MAE training with Adam and a staircase learning-rate schedule.

Each batch runs one tape forward per sample (variable lengths, no padding),
averages the absolute errors into a single scalar node, backpropagates once,
and applies one Adam update. Sample order reshuffles every epoch from an
epoch-derived seed (master seed XOR epoch index), so a run is reproducible
end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import model as model_mod
from . import tape
from .signals import build_input


class TrainingDivergedError(RuntimeError):
    """Loss left the reals; message carries the epoch and batch."""


@dataclass
class TrainConfig:
    epochs: int = 250
    batch_size: int = 16
    lr0: float = 1e-3
    lr_decay: float = 10.0        # divide the rate by this ...
    lr_step_epochs: int = 75      # ... every this many epochs
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    grad_clip: Optional[float] = None   # global-norm ceiling; None disables

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.lr_decay < 1:
            raise ValueError("lr_decay must be >= 1")
        if self.lr_step_epochs < 1:
            raise ValueError("lr_step_epochs must be >= 1")
        if not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive when set")


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """Piecewise-constant decay: lr0 / decay^(epoch // step)."""
    if not (0 <= epoch < config.epochs):
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    return config.lr0 / config.lr_decay ** (epoch // config.lr_step_epochs)


def mae_loss(preds, trues) -> float:
    """Mean absolute error between two equal-length vectors."""
    preds = np.asarray(preds, dtype=np.float64)
    trues = np.asarray(trues, dtype=np.float64)
    if preds.shape != trues.shape or preds.ndim != 1:
        raise ValueError(f"mae_loss needs matching 1-D vectors, "
                         f"got {preds.shape} and {trues.shape}")
    if preds.size == 0:
        raise ValueError("mae_loss of empty vectors")
    return float(np.abs(preds - trues).mean())


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def init_adam(params_flat: Sequence[np.ndarray]) -> AdamState:
    return AdamState(m=[np.zeros_like(p) for p in params_flat],
                     v=[np.zeros_like(p) for p in params_flat])


def adam_step(params_flat: Sequence[np.ndarray], grads_flat: Sequence[np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place."""
    if len(params_flat) != len(state.m) or len(params_flat) != len(grads_flat):
        raise ValueError("parameter, gradient, and state lists disagree in length")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params_flat, grads_flat, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


@dataclass
class TrainHistory:
    epoch_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    val_mae: Optional[list[float]] = None


def _clip_global_norm(grads: list[np.ndarray], ceiling: float) -> None:
    total = 0.0
    for g in grads:
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > ceiling:
        scale = ceiling / norm
        for g in grads:
            g *= scale


def fit(model_config: model_mod.ModelConfig, params: model_mod.ModelParams,
        train_samples, config: TrainConfig, input_mode: str,
        downsample_factor: int = 1, val_samples=None) -> TrainHistory:
    """Train params in place; returns the per-epoch history.

    Samples are preprocessed once up front via build_input. When val_samples
    is given, a validation MAE is recorded after every epoch.
    """
    if not train_samples:
        raise ValueError("no training samples")
    xs = [build_input(s, input_mode, downsample_factor).channels for s in train_samples]
    ys = [float(s.step_count) for s in train_samples]
    val = None
    if val_samples:
        val = ([build_input(s, input_mode, downsample_factor).channels for s in val_samples],
               [float(s.step_count) for s in val_samples])

    node_params, leaves = model_mod.wrap_params(params)
    state = init_adam([leaf.value for leaf in leaves])
    history = TrainHistory(val_mae=[] if val else None)
    n = len(xs)

    for epoch in range(config.epochs):
        order = np.random.default_rng(config.seed ^ epoch).permutation(n)
        lr = lr_at_epoch(config, epoch)
        batch_losses = []
        for b0 in range(0, n, config.batch_size):
            batch = order[b0:b0 + config.batch_size]
            tape.zero_grads(leaves)
            per_sample = []
            for idx in batch:
                pred = model_mod.forward_graph(node_params, model_config, xs[idx])
                err = (pred - tape.Node([[ys[idx]]])).absval()
                per_sample.append(err)
            loss = tape.add_n(per_sample).scale(1.0 / len(per_sample))
            value = loss.value[0, 0]
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"loss is {value} at epoch {epoch}, batch {b0 // config.batch_size}; "
                    f"lower the learning rate or inspect the inputs")
            tape.backward(loss)
            grads = [leaf.grad for leaf in leaves]
            if config.grad_clip is not None:
                _clip_global_norm(grads, config.grad_clip)
            adam_step([leaf.value for leaf in leaves], grads, state, lr,
                      beta1=config.beta1, beta2=config.beta2, eps=config.eps)
            batch_losses.append(value)
        history.epoch_loss.append(float(np.mean(batch_losses)))
        history.lr.append(lr)
        if val:
            preds = [model_mod.predict(params, model_config, x) for x in val[0]]
            history.val_mae.append(mae_loss(preds, val[1]))
    return history
