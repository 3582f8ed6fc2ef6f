"""Sequence-to-sequence symptom forecaster with Monte Carlo dropout.

The encoder LSTM reads T_hist steps of 4-dim features (two normalized
symptom scores concatenated with normalized meal and dose inputs); its
final hidden/cell state initializes the decoder LSTM, which reads the
T_fut future meal/dose inputs.  Each decoder hidden state passes through
an inverted-scaling dropout mask and a shared linear head producing the
two continuous symptom predictions per future step.

Stochastic forward passes with fresh dropout masks give the Monte Carlo
predictive distribution: per-step mean and population standard deviation
over M passes, denormalized back to 1-10 score units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ShapeMismatchError, TrainingDivergedError
from .lstm import LstmParams, init_lstm, lstm_backward, lstm_forward

SYMPTOM_CHANNELS = 2
INPUT_CHANNELS = 2  # meal, dose

PARAM_KEYS = ("enc.wx", "enc.wh", "enc.b", "dec.wx", "dec.wh", "dec.b",
              "head.w", "head.b")
ENCODER_KEYS = ("enc.wx", "enc.wh", "enc.b")
DECODER_HEAD_KEYS = ("dec.wx", "dec.wh", "dec.b", "head.w", "head.b")


@dataclass
class ModelWeights:
    enc: LstmParams
    dec: LstmParams
    w_out: np.ndarray       # [hidden, 2]
    b_out: np.ndarray       # [2]
    dropout: float
    t_hist: int
    t_fut: int
    meal_max: float         # input normalization constants
    dose_max: float

    @property
    def hidden_size(self) -> int:
        return self.enc.hidden_size

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.enc.copy(), self.dec.copy(),
                            self.w_out.copy(), self.b_out.copy(),
                            self.dropout, self.t_hist, self.t_fut,
                            self.meal_max, self.dose_max)


@dataclass
class ForecastDistribution:
    """Per-future-step predictive mean and standard deviation (score units)."""

    mu: np.ndarray      # [t_fut, 2]
    sigma: np.ndarray   # [t_fut, 2], >= 0
    m: int              # stochastic pass count


def init_weights(rng: np.random.Generator, hidden_size: int = 64,
                 t_hist: int = 72, t_fut: int = 72, dropout: float = 0.1,
                 meal_max: float = 1.0, dose_max: float = 1.0) -> ModelWeights:
    if not 0.0 <= dropout < 1.0:
        raise ConfigurationError(f"dropout must be in [0, 1), got {dropout}")
    enc = init_lstm(rng, SYMPTOM_CHANNELS + INPUT_CHANNELS, hidden_size)
    dec = init_lstm(rng, INPUT_CHANNELS, hidden_size)
    bound = 1.0 / np.sqrt(hidden_size)
    w_out = rng.uniform(-bound, bound, (hidden_size, SYMPTOM_CHANNELS))
    b_out = rng.uniform(-bound, bound, SYMPTOM_CHANNELS)
    return ModelWeights(enc, dec, w_out, b_out, dropout, t_hist, t_fut,
                        meal_max, dose_max)


def get_param(weights: ModelWeights, key: str) -> np.ndarray:
    return {
        "enc.wx": weights.enc.wx, "enc.wh": weights.enc.wh, "enc.b": weights.enc.b,
        "dec.wx": weights.dec.wx, "dec.wh": weights.dec.wh, "dec.b": weights.dec.b,
        "head.w": weights.w_out, "head.b": weights.b_out,
    }[key]


def normalize_scores(scores) -> np.ndarray:
    """Map integer 1-10 scores to [0, 1]."""
    return (np.asarray(scores, dtype=float) - 1.0) / 9.0


def denormalize_scores(values) -> np.ndarray:
    return np.asarray(values, dtype=float) * 9.0 + 1.0


def make_dropout_masks(rng: np.random.Generator, rate: float, shape) -> np.ndarray:
    """Inverted-scaling Bernoulli keep masks; expectation of mask is 1."""
    if rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate).astype(float) / (1.0 - rate)


def _check_window_shapes(weights, hist_symptoms, inputs):
    t_total = weights.t_hist + weights.t_fut
    if hist_symptoms.shape[-2:] != (weights.t_hist, SYMPTOM_CHANNELS):
        raise ShapeMismatchError("history tensor has wrong shape",
                                 expected=("...", weights.t_hist, SYMPTOM_CHANNELS),
                                 actual=hist_symptoms.shape)
    if inputs.shape[-2:] != (t_total, INPUT_CHANNELS):
        raise ShapeMismatchError("combined-input tensor has wrong shape",
                                 expected=("...", t_total, INPUT_CHANNELS),
                                 actual=inputs.shape)
    if hist_symptoms.ndim != inputs.ndim or (
            hist_symptoms.ndim == 3 and hist_symptoms.shape[0] != inputs.shape[0]):
        raise ShapeMismatchError("history and input batch dims disagree",
                                 expected=hist_symptoms.shape[:1],
                                 actual=inputs.shape[:1])


def _forward_cached(weights: ModelWeights, hist_symptoms: np.ndarray,
                    inputs: np.ndarray, dropout_masks: np.ndarray | None):
    """Batched forward keeping caches for the backward pass."""
    enc_x = np.concatenate([hist_symptoms, inputs[:, :weights.t_hist]], axis=2)
    batch = enc_x.shape[0]
    hidden = weights.hidden_size
    zeros = np.zeros((batch, hidden))
    _, (h, c), enc_cache = lstm_forward(weights.enc, enc_x, zeros, zeros)
    dec_x = np.ascontiguousarray(inputs[:, weights.t_hist:])
    h_seq, _, dec_cache = lstm_forward(weights.dec, dec_x, h, c)
    dropped = h_seq if dropout_masks is None else h_seq * dropout_masks
    y = dropped @ weights.w_out + weights.b_out
    return y, (enc_cache, dec_cache, dropped)


def forward(weights: ModelWeights, hist_symptoms, inputs, dropout_masks=None) -> np.ndarray:
    """Deterministic (or explicitly masked) prediction, [.., t_fut, 2] normalized.

    Accepts a single window ([T, 2] tensors) or a batch ([B, T, 2]).
    """
    hist_symptoms = np.asarray(hist_symptoms, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    _check_window_shapes(weights, hist_symptoms, inputs)
    single = hist_symptoms.ndim == 2
    if single:
        hist_symptoms = hist_symptoms[None]
        inputs = inputs[None]
        if dropout_masks is not None and dropout_masks.ndim == 2:
            dropout_masks = dropout_masks[None]
    y, _ = _forward_cached(weights, hist_symptoms, inputs, dropout_masks)
    return y[0] if single else y


def loss_and_gradients(weights: ModelWeights, hist_symptoms, inputs, targets,
                       dropout_masks=None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean-squared error over the batch and its gradients for every parameter."""
    hist_symptoms = np.asarray(hist_symptoms, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if hist_symptoms.ndim != 3:
        raise ShapeMismatchError("batch tensors must be 3-D [batch, time, channel]",
                                 actual=hist_symptoms.shape)
    if hist_symptoms.shape[0] == 0:
        raise ConfigurationError("batch must be non-empty")
    _check_window_shapes(weights, hist_symptoms, inputs)
    if targets.shape != (hist_symptoms.shape[0], weights.t_fut, SYMPTOM_CHANNELS):
        raise ShapeMismatchError(
            "target tensor has wrong shape",
            expected=(hist_symptoms.shape[0], weights.t_fut, SYMPTOM_CHANNELS),
            actual=targets.shape)

    y, (enc_cache, dec_cache, dropped) = _forward_cached(
        weights, hist_symptoms, inputs, dropout_masks)
    err = y - targets
    loss = float(np.mean(err * err))
    if not np.isfinite(loss):
        raise TrainingDivergedError(loss)

    dy = (2.0 / err.size) * err                     # [B, T_fut, 2]
    db_out = dy.sum(axis=(0, 1))
    dw_out = np.einsum("bth,btk->hk", dropped, dy)
    dh_drop = dy @ weights.w_out.T
    dh_seq = dh_drop if dropout_masks is None else dh_drop * dropout_masks

    batch = hist_symptoms.shape[0]
    hidden = weights.hidden_size
    zeros = np.zeros((batch, hidden))
    (ddec_wx, ddec_wh, ddec_b), _, dh0, dc0 = lstm_backward(
        weights.dec, dec_cache, dh_seq, zeros, zeros)
    enc_steps_grad = np.zeros((batch, weights.t_hist, hidden))
    (denc_wx, denc_wh, denc_b), _, _, _ = lstm_backward(
        weights.enc, enc_cache, enc_steps_grad, dh0, dc0)
    grads = {
        "enc.wx": denc_wx, "enc.wh": denc_wh, "enc.b": denc_b,
        "dec.wx": ddec_wx, "dec.wh": ddec_wh, "dec.b": ddec_b,
        "head.w": dw_out, "head.b": db_out,
    }
    return loss, grads


def encode(weights: ModelWeights, hist_symptoms: np.ndarray,
           hist_inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Encoder summary (h, c) of one history window, each [1, hidden]."""
    enc_x = np.concatenate([hist_symptoms, hist_inputs], axis=1)[None]
    zeros = np.zeros((1, weights.hidden_size))
    _, (h, c), _ = lstm_forward(weights.enc, enc_x, zeros, zeros, want_cache=False)
    return h, c


def decode(weights: ModelWeights, h0: np.ndarray, c0: np.ndarray,
           future_inputs: np.ndarray, dropout_masks=None) -> np.ndarray:
    """Decoder + head over a batch of future-input sequences [B, t_fut, 2]."""
    h_seq, _, _ = lstm_forward(weights.dec, future_inputs, h0, c0, want_cache=False)
    if dropout_masks is not None:
        h_seq = h_seq * dropout_masks
    return h_seq @ weights.w_out + weights.b_out


def predict_mc(weights: ModelWeights, hist_symptoms, inputs, m: int,
               rng: np.random.Generator) -> ForecastDistribution:
    """M stochastic forward passes with independent dropout masks.

    Inputs are a single normalized window; the returned mean and
    population standard deviation are in 1-10 score units.
    """
    if m < 1:
        raise ConfigurationError(f"pass count must be >= 1, got {m}")
    hist_symptoms = np.asarray(hist_symptoms, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if hist_symptoms.ndim != 2:
        raise ShapeMismatchError("predict_mc expects a single window",
                                 actual=hist_symptoms.shape)
    _check_window_shapes(weights, hist_symptoms, inputs)
    h, c = encode(weights, hist_symptoms, inputs[:weights.t_hist])
    h_rep = np.repeat(h, m, axis=0)
    c_rep = np.repeat(c, m, axis=0)
    future = np.broadcast_to(inputs[weights.t_hist:], (m, weights.t_fut, INPUT_CHANNELS))
    masks = make_dropout_masks(rng, weights.dropout, (m, weights.t_fut, weights.hidden_size))
    ys = decode(weights, h_rep, c_rep, np.ascontiguousarray(future), masks)
    mu = denormalize_scores(ys.mean(axis=0))
    sigma = ys.std(axis=0) * 9.0
    return ForecastDistribution(mu=mu, sigma=sigma, m=m)
