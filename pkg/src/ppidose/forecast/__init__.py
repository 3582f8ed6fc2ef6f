"""Recurrent symptom forecaster: model, training, MC-dropout inference, I/O."""

from .lstm import LstmParams, init_lstm, lstm_backward, lstm_forward
from .model import (
    DECODER_HEAD_KEYS,
    ENCODER_KEYS,
    ForecastDistribution,
    ModelWeights,
    PARAM_KEYS,
    decode,
    denormalize_scores,
    encode,
    forward,
    get_param,
    init_weights,
    loss_and_gradients,
    make_dropout_masks,
    normalize_scores,
    predict_mc,
)
from .train import TrainConfig, TrainHistory, evaluate_loss, finetune, temporal_split, train
from .io import load_weights, save_weights
