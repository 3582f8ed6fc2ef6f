"""Shared test helpers: finite-difference gradient checking."""

import numpy as np

from ppidose.forecast import PARAM_KEYS, forward, get_param, loss_and_gradients


def fd_loss(model, hist, inputs, targets, masks):
    y = forward(model, hist, inputs, dropout_masks=masks)
    return float(np.mean((y - targets) ** 2))


def max_gradient_error(model, hist, inputs, targets, masks, step=1e-5):
    """Worst relative disagreement between BPTT and central differences."""
    _, grads = loss_and_gradients(model, hist, inputs, targets, dropout_masks=masks)
    worst = 0.0
    for key in PARAM_KEYS:
        arr = get_param(model, key)
        flat = arr.ravel()
        gflat = grads[key].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = fd_loss(model, hist, inputs, targets, masks)
            flat[i] = orig - step
            down = fd_loss(model, hist, inputs, targets, masks)
            flat[i] = orig
            fd = (up - down) / (2 * step)
            err = abs(fd - gflat[i]) / max(1e-4, abs(fd), abs(gflat[i]))
            worst = max(worst, err)
    return worst
