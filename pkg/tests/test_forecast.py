"""Forecaster: forward oracle, BPTT gradients, MC dropout, training, I/O."""

import math
import warnings

import numpy as np
import pytest

from ppidose import ConfigurationError, ShapeMismatchError
from ppidose.forecast import (
    ForecastDistribution,
    ModelWeights,
    PARAM_KEYS,
    TrainConfig,
    denormalize_scores,
    finetune,
    forward,
    get_param,
    init_weights,
    load_weights,
    loss_and_gradients,
    make_dropout_masks,
    predict_mc,
    save_weights,
    temporal_split,
    train,
)


def tiny_model(rng, hidden=3, t_hist=2, t_fut=2, dropout=0.0):
    return init_weights(rng, hidden_size=hidden, t_hist=t_hist, t_fut=t_fut,
                        dropout=dropout)


def random_window(rng, model, batch=None):
    shape_h = (model.t_hist, 2) if batch is None else (batch, model.t_hist, 2)
    shape_i = ((model.t_hist + model.t_fut, 2) if batch is None
               else (batch, model.t_hist + model.t_fut, 2))
    shape_t = (model.t_fut, 2) if batch is None else (batch, model.t_fut, 2)
    return (rng.uniform(0, 1, shape_h), rng.uniform(0, 1, shape_i),
            rng.uniform(0, 1, shape_t))


# ---------------------------------------------------------------------------
# independent scalar re-implementation of the whole forward pass


def _ref_lstm(wx, wh, b, xs, h0, c0):
    hidden = len(h0)
    h, c = list(h0), list(c0)
    h_seq = []
    for x in xs:
        z = []
        for j in range(4 * hidden):
            acc = b[j]
            for i, xv in enumerate(x):
                acc += xv * wx[i][j]
            for k in range(hidden):
                acc += h[k] * wh[k][j]
            z.append(acc)
        gi = [1.0 / (1.0 + math.exp(-z[j])) for j in range(hidden)]
        gf = [1.0 / (1.0 + math.exp(-z[hidden + j])) for j in range(hidden)]
        gg = [math.tanh(z[2 * hidden + j]) for j in range(hidden)]
        go = [1.0 / (1.0 + math.exp(-z[3 * hidden + j])) for j in range(hidden)]
        c = [gf[j] * c[j] + gi[j] * gg[j] for j in range(hidden)]
        h = [go[j] * math.tanh(c[j]) for j in range(hidden)]
        h_seq.append(list(h))
    return h_seq, h, c


def _ref_forward(model: ModelWeights, hist, inputs):
    hidden = model.hidden_size
    enc_x = [list(hist[t]) + list(inputs[t]) for t in range(model.t_hist)]
    _, h, c = _ref_lstm(model.enc.wx.tolist(), model.enc.wh.tolist(),
                        model.enc.b.tolist(), enc_x,
                        [0.0] * hidden, [0.0] * hidden)
    dec_x = [list(inputs[model.t_hist + t]) for t in range(model.t_fut)]
    h_seq, _, _ = _ref_lstm(model.dec.wx.tolist(), model.dec.wh.tolist(),
                            model.dec.b.tolist(), dec_x, h, c)
    out = []
    for ht in h_seq:
        row = []
        for k in range(2):
            acc = model.b_out[k]
            for j in range(hidden):
                acc += ht[j] * model.w_out[j, k]
            row.append(acc)
        out.append(row)
    return np.array(out)


class TestForward:
    def test_zero_weights_give_zero_outputs(self):
        model = tiny_model(np.random.default_rng(0), hidden=4, t_hist=3, t_fut=3)
        for key in PARAM_KEYS:
            get_param(model, key)[...] = 0.0
        hist, inputs, _ = random_window(np.random.default_rng(1), model)
        assert np.array_equal(forward(model, hist, inputs), np.zeros((3, 2)))

    def test_deterministic_without_dropout(self):
        model = tiny_model(np.random.default_rng(2), hidden=5)
        hist, inputs, _ = random_window(np.random.default_rng(3), model)
        assert np.array_equal(forward(model, hist, inputs),
                              forward(model, hist, inputs))

    def test_matches_scalar_reference(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            model = tiny_model(rng, hidden=3, t_hist=2, t_fut=2)
            hist, inputs, _ = random_window(rng, model)
            got = forward(model, hist, inputs)
            ref = _ref_forward(model, hist, inputs)
            assert np.max(np.abs(got - ref)) < 1e-10

    def test_batch_shape_contract(self):
        model = tiny_model(np.random.default_rng(4), t_hist=3, t_fut=4)
        for batch in (1, 2, 7):
            hist, inputs, _ = random_window(np.random.default_rng(5), model, batch)
            assert forward(model, hist, inputs).shape == (batch, 4, 2)

    def test_shape_mismatch_raises(self):
        model = tiny_model(np.random.default_rng(6))
        hist, inputs, _ = random_window(np.random.default_rng(7), model)
        with pytest.raises(ShapeMismatchError):
            forward(model, hist[:-1], inputs)
        with pytest.raises(ShapeMismatchError):
            forward(model, hist, inputs[:-1])


from conftest import max_gradient_error


class TestGradients:
    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(42)
        for trial in range(12):
            hidden = int(rng.integers(2, 5))
            t_hist = int(rng.integers(1, 4))
            t_fut = int(rng.integers(1, 4))
            batch = int(rng.integers(1, 4))
            dropout = 0.0 if trial % 2 == 0 else 0.3
            model = tiny_model(rng, hidden, t_hist, t_fut, dropout)
            hist, inputs, targets = random_window(rng, model, batch)
            masks = None
            if dropout > 0:
                masks = make_dropout_masks(rng, dropout, (batch, t_fut, hidden))
            assert max_gradient_error(model, hist, inputs, targets, masks) < 1e-4

    def test_perfect_predictions_give_zero_loss_and_bias_grad(self):
        model = tiny_model(np.random.default_rng(8), hidden=4, t_hist=2, t_fut=3)
        hist, inputs, _ = random_window(np.random.default_rng(9), model, batch=2)
        targets = forward(model, hist, inputs)
        loss, grads = loss_and_gradients(model, hist, inputs, targets)
        assert loss == 0.0
        assert np.array_equal(grads["head.b"], np.zeros(2))

    def test_duplicated_batch_leaves_loss_unchanged(self):
        model = tiny_model(np.random.default_rng(10), hidden=4)
        hist, inputs, targets = random_window(np.random.default_rng(11), model, batch=3)
        loss1, _ = loss_and_gradients(model, hist, inputs, targets)
        loss2, _ = loss_and_gradients(model, np.tile(hist, (2, 1, 1)),
                                      np.tile(inputs, (2, 1, 1)),
                                      np.tile(targets, (2, 1, 1)))
        assert loss1 == pytest.approx(loss2, rel=1e-12)

    def test_empty_batch_rejected(self):
        model = tiny_model(np.random.default_rng(12))
        hist, inputs, targets = random_window(np.random.default_rng(13), model, batch=2)
        with pytest.raises(ConfigurationError):
            loss_and_gradients(model, hist[:0], inputs[:0], targets[:0])


class TestPredictMc:
    def test_zero_dropout_gives_zero_sigma_and_deterministic_mean(self):
        model = tiny_model(np.random.default_rng(14), hidden=6, dropout=0.0)
        hist, inputs, _ = random_window(np.random.default_rng(15), model)
        dist = predict_mc(model, hist, inputs, m=5, rng=np.random.default_rng(0))
        assert np.array_equal(dist.sigma, np.zeros_like(dist.sigma))
        det = denormalize_scores(forward(model, hist, inputs))
        assert np.allclose(dist.mu, det, atol=1e-12)

    def test_single_pass_gives_zero_sigma(self):
        model = tiny_model(np.random.default_rng(16), dropout=0.4)
        hist, inputs, _ = random_window(np.random.default_rng(17), model)
        dist = predict_mc(model, hist, inputs, m=1, rng=np.random.default_rng(1))
        assert np.array_equal(dist.sigma, np.zeros_like(dist.sigma))

    def test_reproducible_and_consistent_with_large_m(self):
        model = tiny_model(np.random.default_rng(18), hidden=8, t_hist=3, t_fut=3,
                           dropout=0.2)
        hist, inputs, _ = random_window(np.random.default_rng(19), model)
        a = predict_mc(model, hist, inputs, m=30, rng=np.random.default_rng(7))
        b = predict_mc(model, hist, inputs, m=30, rng=np.random.default_rng(7))
        assert np.array_equal(a.mu, b.mu) and np.array_equal(a.sigma, b.sigma)
        big = predict_mc(model, hist, inputs, m=10_000, rng=np.random.default_rng(8))
        tol = 3.0 * big.sigma / math.sqrt(30) + 1e-9
        assert np.all(np.abs(a.mu - big.mu) <= tol)

    def test_sigma_nonnegative_random_models(self):
        rng = np.random.default_rng(20)
        for seed in range(5):
            model = tiny_model(np.random.default_rng(seed), dropout=0.3)
            hist, inputs, _ = random_window(rng, model)
            dist = predict_mc(model, hist, inputs, m=12, rng=rng)
            assert isinstance(dist, ForecastDistribution)
            assert np.all(dist.sigma >= 0.0)

    def test_invalid_pass_count(self):
        model = tiny_model(np.random.default_rng(21))
        hist, inputs, _ = random_window(np.random.default_rng(22), model)
        with pytest.raises(ConfigurationError):
            predict_mc(model, hist, inputs, m=0, rng=np.random.default_rng(0))


class TestDropoutMasks:
    def test_inverted_scaling_is_unbiased(self):
        rng = np.random.default_rng(0)
        h = rng.uniform(-1.0, 1.0, 16)
        rate = 0.25
        m = 10_000
        masks = make_dropout_masks(rng, rate, (m, 16))
        mean = (h * masks).mean(axis=0)
        se = np.abs(h) * math.sqrt(rate / (1 - rate)) / math.sqrt(m)
        assert np.all(np.abs(mean - h) <= 3 * se + 1e-12)

    def test_zero_rate_is_identity(self):
        masks = make_dropout_masks(np.random.default_rng(0), 0.0, (3, 4))
        assert np.array_equal(masks, np.ones((3, 4)))


def constant_target_set(model, rng, n=12, value=0.5):
    hist = rng.uniform(0.2, 0.8, (n, model.t_hist, 2))
    inputs = rng.uniform(0.0, 1.0, (n, model.t_hist + model.t_fut, 2))
    targets = np.full((n, model.t_fut, 2), value)
    return hist, inputs, targets


class TestTraining:
    def test_zero_lr_leaves_weights_unchanged(self):
        model = tiny_model(np.random.default_rng(24), hidden=4)
        data = constant_target_set(model, np.random.default_rng(25))
        config = TrainConfig(lr=0.0, weight_decay=0.0, max_epochs=3,
                             batch_size=4, patience=10)
        out, _ = train(model, data, data, config, np.random.default_rng(0))
        for key in PARAM_KEYS:
            assert np.array_equal(get_param(out, key), get_param(model, key))

    def test_memorizes_constant_targets(self):
        model = tiny_model(np.random.default_rng(26), hidden=8, t_hist=4, t_fut=3,
                           dropout=0.0)
        data = constant_target_set(model, np.random.default_rng(27))
        config = TrainConfig(lr=0.05, max_epochs=300, batch_size=6, patience=300,
                             lr_patience=300, weight_decay=0.0)
        _, history = train(model, data, data, config, np.random.default_rng(1))
        assert min(history.train_loss) < 1e-3

    def test_returns_best_validation_checkpoint(self):
        model = tiny_model(np.random.default_rng(28), hidden=6, t_hist=3, t_fut=3)
        rng = np.random.default_rng(29)
        data = constant_target_set(model, rng, n=20)
        val = constant_target_set(model, rng, n=6)
        config = TrainConfig(lr=0.05, max_epochs=40, batch_size=8, patience=40,
                             lr_patience=40)
        out, history = train(model, data, val, config, np.random.default_rng(2))
        from ppidose.forecast import evaluate_loss
        returned = evaluate_loss(out, *val)
        assert returned == pytest.approx(min(history.val_loss), abs=1e-12)
        assert returned <= history.val_loss[-1] + 1e-12

    def test_divergence_reports_epoch(self):
        from ppidose import TrainingDivergedError
        model = tiny_model(np.random.default_rng(30), hidden=4)
        get_param(model, "head.w")[...] = 1e200
        get_param(model, "head.b")[...] = 1e200
        data = constant_target_set(model, np.random.default_rng(31))
        config = TrainConfig(lr=1e10, max_epochs=5, batch_size=4, grad_clip=1e30)
        with pytest.raises(TrainingDivergedError) as err:
            train(model, data, data, config, np.random.default_rng(3))
        assert err.value.epoch is not None

    def test_temporal_split(self):
        tr, va = temporal_split(10, 0.1)
        assert tr.tolist() == list(range(9)) and va.tolist() == [9]
        tr1, va1 = temporal_split(1)
        assert tr1.tolist() == [0] and va1.tolist() == [0]


class TestFinetune:
    def test_encoder_frozen_exactly(self):
        foundation = tiny_model(np.random.default_rng(32), hidden=6, t_hist=3, t_fut=3)
        data = constant_target_set(foundation, np.random.default_rng(33), n=15)
        config = TrainConfig(lr=0.05, max_epochs=20, batch_size=8, patience=20)
        tuned, _ = finetune(foundation, data, config, np.random.default_rng(4))
        for key in ("enc.wx", "enc.wh", "enc.b"):
            assert np.array_equal(get_param(tuned, key), get_param(foundation, key))
        # and something did move
        moved = any(not np.array_equal(get_param(tuned, k), get_param(foundation, k))
                    for k in ("dec.wx", "dec.wh", "dec.b", "head.w", "head.b"))
        assert moved

    def test_empty_dataset_returns_foundation_with_warning(self):
        foundation = tiny_model(np.random.default_rng(34), hidden=4)
        empty = (np.zeros((0, foundation.t_hist, 2)),
                 np.zeros((0, foundation.t_hist + foundation.t_fut, 2)),
                 np.zeros((0, foundation.t_fut, 2)))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            tuned, _ = finetune(foundation, empty, TrainConfig(),
                                np.random.default_rng(5))
        assert any("empty" in str(w.message) for w in caught)
        for key in PARAM_KEYS:
            assert np.array_equal(get_param(tuned, key), get_param(foundation, key))


class TestSerialization:
    def test_roundtrip_bit_identical(self, tmp_path):
        model = tiny_model(np.random.default_rng(35), hidden=7, t_hist=4, t_fut=5,
                           dropout=0.15)
        model.meal_max = 2.3
        model.dose_max = 1.0
        path = tmp_path / "weights.bin"
        save_weights(model, path)
        loaded = load_weights(path)
        for key in PARAM_KEYS:
            assert np.array_equal(get_param(loaded, key), get_param(model, key))
        assert (loaded.dropout, loaded.t_hist, loaded.t_fut) == (0.15, 4, 5)
        assert (loaded.meal_max, loaded.dose_max) == (2.3, 1.0)
        hist, inputs, _ = random_window(np.random.default_rng(36), model)
        assert np.array_equal(forward(loaded, hist, inputs),
                              forward(model, hist, inputs))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(ConfigurationError):
            load_weights(path)

    def test_save_is_deterministic(self, tmp_path):
        model = tiny_model(np.random.default_rng(37), hidden=4)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_weights(model, p1)
        save_weights(model, p2)
        assert p1.read_bytes() == p2.read_bytes()
