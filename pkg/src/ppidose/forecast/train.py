"""SGD training loop: momentum, decoupled weight decay, early stopping.

``train`` owns the full loop (shuffling, dropout masks, gradient clip,
plateau learning-rate decay, best-checkpoint tracking); ``finetune``
reuses it with the encoder parameters frozen so only the decoder and
regression head adapt to one patient's data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, TrainingDivergedError
from .model import (
    DECODER_HEAD_KEYS,
    PARAM_KEYS,
    ModelWeights,
    get_param,
    loss_and_gradients,
    forward,
    make_dropout_masks,
)


@dataclass
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 30
    lr_patience: int = 8
    lr_decay: float = 0.5
    grad_clip: float = 5.0

    def __post_init__(self):
        if self.lr < 0 or not (0.0 <= self.momentum < 1.0):
            raise ConfigurationError("lr must be >= 0 and momentum in [0, 1)")
        if self.weight_decay < 0 or self.grad_clip <= 0:
            raise ConfigurationError("weight_decay must be >= 0 and grad_clip > 0")
        if min(self.batch_size, self.max_epochs, self.patience, self.lr_patience) < 1:
            raise ConfigurationError("batch_size, max_epochs and patiences must be >= 1")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigurationError("lr_decay must be in (0, 1]")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1


def evaluate_loss(weights: ModelWeights, hist, inputs, targets,
                  batch_size: int = 256) -> float:
    """Deterministic (dropout off) mean-squared error over a whole set."""
    total = 0.0
    n = hist.shape[0]
    for start in range(0, n, batch_size):
        sl = slice(start, min(start + batch_size, n))
        y = forward(weights, hist[sl], inputs[sl])
        err = y - targets[sl]
        total += float(np.sum(err * err))
    return total / (n * targets.shape[1] * targets.shape[2])


def temporal_split(n: int, val_fraction: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Train/validation index split: validation = trailing windows."""
    if n < 1:
        raise ConfigurationError("cannot split an empty window set")
    if n == 1:
        idx = np.array([0])
        return idx, idx
    n_val = max(1, int(round(val_fraction * n)))
    n_val = min(n_val, n - 1)
    return np.arange(n - n_val), np.arange(n - n_val, n)


def _global_norm(grads: dict[str, np.ndarray], keys) -> float:
    return float(np.sqrt(sum(np.sum(grads[k] * grads[k]) for k in keys)))


def train(weights: ModelWeights, train_set, val_set, config: TrainConfig,
          rng: np.random.Generator,
          trainable: tuple[str, ...] = PARAM_KEYS) -> tuple[ModelWeights, TrainHistory]:
    """Run SGD with momentum; return the best-validation checkpoint.

    ``train_set``/``val_set`` are (hist, inputs, targets) array triples,
    window-major.  Only parameters named in ``trainable`` are updated;
    everything else is untouched (finetuning freezes the encoder this
    way).  Decoupled weight decay applies to weight matrices only, not
    biases.
    """
    hist, inputs, targets = (np.asarray(a, dtype=float) for a in train_set)
    v_hist, v_inputs, v_targets = (np.asarray(a, dtype=float) for a in val_set)
    n = hist.shape[0]
    if n == 0 or v_hist.shape[0] == 0:
        raise ConfigurationError("train and validation sets must be non-empty")

    model = weights.copy()
    velocity = {k: np.zeros_like(get_param(model, k)) for k in trainable}
    decay_keys = tuple(k for k in trainable if not k.endswith(".b") and k != "head.b")
    lr = config.lr
    history = TrainHistory()
    best_val = np.inf
    best_state = model.copy()
    since_best = 0
    since_lr_drop = 0

    for epoch in range(config.max_epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            masks = make_dropout_masks(
                rng, model.dropout, (idx.size, model.t_fut, model.hidden_size))
            try:
                loss, grads = loss_and_gradients(
                    model, hist[idx], inputs[idx], targets[idx], dropout_masks=masks)
            except TrainingDivergedError as err:
                raise TrainingDivergedError(err.loss, epoch) from None
            epoch_loss += loss * idx.size

            norm = _global_norm(grads, trainable)
            scale = config.grad_clip / norm if norm > config.grad_clip else 1.0
            for key in trainable:
                vel = velocity[key]
                vel *= config.momentum
                vel += scale * grads[key]
                param = get_param(model, key)
                param -= lr * vel
            if config.weight_decay > 0.0:
                for key in decay_keys:
                    param = get_param(model, key)
                    param -= lr * config.weight_decay * param

        val_loss = evaluate_loss(model, v_hist, v_inputs, v_targets)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(val_loss, epoch)
        history.train_loss.append(epoch_loss / n)
        history.val_loss.append(val_loss)
        history.lr.append(lr)

        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_state = model.copy()
            history.best_epoch = epoch
            since_best = 0
            since_lr_drop = 0
        else:
            since_best += 1
            since_lr_drop += 1
            if since_best >= config.patience:
                break
            if since_lr_drop >= config.lr_patience:
                lr *= config.lr_decay
                since_lr_drop = 0

    if history.best_epoch < 0:
        # no epoch improved on +inf (cannot happen with finite losses), keep init
        best_state = model.copy()
    return best_state, history


def finetune(foundation: ModelWeights, patient_set, config: TrainConfig,
             rng: np.random.Generator,
             val_fraction: float = 0.1) -> tuple[ModelWeights, TrainHistory]:
    """Adapt decoder + head to one patient; encoder stays bit-identical.

    ``patient_set`` is a (hist, inputs, targets) triple in chronological
    window order; the trailing fraction is held out for early stopping.
    An empty set returns the foundation unchanged with a warning.
    """
    hist, inputs, targets = patient_set
    n = np.asarray(hist).shape[0]
    if n == 0:
        warnings.warn("empty patient dataset: returning foundation weights unchanged")
        return foundation.copy(), TrainHistory()
    tr_idx, va_idx = temporal_split(n, val_fraction)
    train_set = (hist[tr_idx], inputs[tr_idx], targets[tr_idx])
    val_set = (hist[va_idx], inputs[va_idx], targets[va_idx])
    return train(foundation, train_set, val_set, config, rng,
                 trainable=DECODER_HEAD_KEYS)
