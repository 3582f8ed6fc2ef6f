"""Acid level -> noisy 1-10 reflux and digestion scores.

Both continuous maps are logistic sigmoids ranging over (1, 10); the
reported integer score adds a fixed per-patient offset and fresh
Gaussian noise, floors, and clips to {1, ..., 10}.
"""

from __future__ import annotations

import math

import numpy as np

from .patient import PatientParams

SCORE_MIN = 1
SCORE_MAX = 10

_erf = np.vectorize(math.erf, otypes=[float])


def reflux_score_continuous(acid, a_high: float, k_r: float):
    """1 + 9/(1 + exp(-k_r*(A - a_high))); increasing in A, range (1, 10)."""
    if k_r <= 0.0:
        raise ValueError(f"k_r must be > 0, got {k_r}")
    with np.errstate(over="ignore"):
        return 1.0 + 9.0 / (1.0 + np.exp(-k_r * (np.asarray(acid, dtype=float) - a_high)))


def digestion_score_continuous(acid, a_low: float, k_d: float):
    """1 + 9/(1 + exp(k_d*(A - a_low))); decreasing in A, range (1, 10)."""
    if k_d <= 0.0:
        raise ValueError(f"k_d must be > 0, got {k_d}")
    with np.errstate(over="ignore"):
        return 1.0 + 9.0 / (1.0 + np.exp(k_d * (np.asarray(acid, dtype=float) - a_low)))


def report(s_cont, eta, noise):
    """clip(floor(S + eta + noise), 1, 10) as integer score(s)."""
    raw = np.floor(np.asarray(s_cont, dtype=float) + eta + noise)
    return np.clip(raw, SCORE_MIN, SCORE_MAX).astype(np.int64)


def encode_reports(acid, params: PatientParams,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Hourly integer reflux/digestion reports for an acid trace.

    Noise is drawn as an (n, 2) matrix, column 0 reflux and column 1
    digestion, so the draw order is fixed for reproducibility.
    """
    acid = np.asarray(acid, dtype=float)
    noise = rng.normal(0.0, params.sigma_noise, size=(acid.shape[0], 2))
    s_r = reflux_score_continuous(acid, params.a_high, params.k_r)
    s_d = digestion_score_continuous(acid, params.a_low, params.k_d)
    return (report(s_r, params.eta_r, noise[:, 0]),
            report(s_d, params.eta_d, noise[:, 1]))


def report_moments(s_cont, eta: float, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean and variance of the reported score given the continuous score.

    The report is clip(floor(x + n), 1, 10) with x = S + eta and
    n ~ N(0, sigma^2); the distribution over {1..10} follows from the
    normal CDF at the integer cut points.  Used for the best-possible
    predictor baseline and the report-noise floor.
    """
    x = np.atleast_1d(np.asarray(s_cont, dtype=float)) + eta
    if sigma == 0.0:
        mean = np.clip(np.floor(x), SCORE_MIN, SCORE_MAX).astype(float)
        return mean, np.zeros_like(mean)
    # P(report <= k) = Phi((k+1 - x)/sigma) for k = 1..9, = 1 at k = 10
    ks = np.arange(SCORE_MIN, SCORE_MAX + 1, dtype=float)
    z = (ks[1:, None] - x[None, :]) / sigma          # cut points 2..10
    cdf = 0.5 * (1.0 + _erf(z / math.sqrt(2.0)))
    upper = np.vstack([cdf, np.ones((1, x.shape[0]))])   # P(report <= k), k=1..10
    lower = np.vstack([np.zeros((1, x.shape[0])), cdf])
    pmf = upper - lower
    mean = ks @ pmf
    var = (ks ** 2) @ pmf - mean ** 2
    return mean, np.maximum(var, 0.0)
