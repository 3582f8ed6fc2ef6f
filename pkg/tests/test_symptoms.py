"""Symptom encoding: sigmoid maps, reporting channel, exact moments."""

import math

import numpy as np
import pytest

from ppidose import (
    digestion_score_continuous,
    encode_reports,
    reflux_score_continuous,
    report,
    report_moments,
)
from ppidose.patient import PatientParams


class TestContinuousScores:
    def test_reflux_midpoint(self):
        assert reflux_score_continuous(1.7, a_high=1.7, k_r=3.0) == pytest.approx(5.5)

    def test_reflux_saturation(self):
        k_r, a_high = 3.0, 1.7
        lo = reflux_score_continuous(a_high - 50.0 / k_r, a_high, k_r)
        hi = reflux_score_continuous(a_high + 50.0 / k_r, a_high, k_r)
        assert lo == pytest.approx(1.0, abs=1e-6)
        assert hi == pytest.approx(10.0, abs=1e-6)

    def test_reflux_direct_evaluation(self):
        # 1 + 9/(1 + e^-2) evaluated independently
        expected = 1.0 + 9.0 / (1.0 + math.exp(-2.0))
        assert expected == pytest.approx(8.9271737, abs=1e-6)
        assert reflux_score_continuous(2.0, a_high=1.0, k_r=2.0) == pytest.approx(expected)

    def test_digestion_midpoint_and_saturation(self):
        assert digestion_score_continuous(0.4, a_low=0.4, k_d=5.0) == pytest.approx(5.5)
        assert digestion_score_continuous(1e6, a_low=0.4, k_d=5.0) == pytest.approx(1.0, abs=1e-9)

    def test_digestion_mirrors_reflux(self):
        # k_d = 2, A - a_low = -1 is the mirror of the reflux case
        got = digestion_score_continuous(-0.6, a_low=0.4, k_d=2.0)
        assert got == pytest.approx(1.0 + 9.0 / (1.0 + math.exp(-2.0)))

    def test_monotonicity(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a1, a2 = sorted(rng.uniform(-5.0, 8.0, 2))
            assert (reflux_score_continuous(a1, 1.7, 4.0)
                    <= reflux_score_continuous(a2, 1.7, 4.0))
            assert (digestion_score_continuous(a1, 0.4, 4.0)
                    >= digestion_score_continuous(a2, 0.4, 4.0))

    def test_bad_steepness_rejected(self):
        with pytest.raises(ValueError):
            reflux_score_continuous(1.0, 1.7, 0.0)
        with pytest.raises(ValueError):
            digestion_score_continuous(1.0, 0.4, -1.0)


class TestReport:
    def test_floor(self):
        assert report(5.5, 0.0, 0.0) == 5

    def test_upper_clip(self):
        assert report(10.0, 0.0, 3.0) == 10

    def test_lower_clip(self):
        assert report(1.2, 0.0, -5.0) == 1

    def test_range_for_any_input(self):
        rng = np.random.default_rng(11)
        values = np.concatenate([rng.uniform(-100, 100, 500), [np.inf, -np.inf]])
        out = report(values, 0.3, 0.0)
        assert out.min() >= 1 and out.max() <= 10

    def test_deterministic_without_noise(self):
        p = PatientParams(k_e=0.5, k_bind=0.6, k_rec=0.007, s0=1.0, s_meal=2.0,
                          k_A=1.0, a_high=1.9, a_low=0.3, k_r=5.0, k_d=5.0,
                          eta_r=0.0, eta_d=0.0, sigma_noise=0.0)
        acid = np.linspace(0.0, 4.0, 50)
        r1, d1 = encode_reports(acid, p, np.random.default_rng(0))
        r2, d2 = encode_reports(acid, p, np.random.default_rng(999))
        assert np.array_equal(r1, r2) and np.array_equal(d1, d2)

    def test_encode_reports_reproducible(self):
        p = PatientParams(k_e=0.5, k_bind=0.6, k_rec=0.007, s0=1.0, s_meal=2.0,
                          k_A=1.0, a_high=1.9, a_low=0.3, k_r=5.0, k_d=5.0,
                          eta_r=0.2, eta_d=-0.1, sigma_noise=0.3)
        acid = np.linspace(0.0, 4.0, 100)
        r1, d1 = encode_reports(acid, p, np.random.default_rng(5))
        r2, d2 = encode_reports(acid, p, np.random.default_rng(5))
        assert np.array_equal(r1, r2) and np.array_equal(d1, d2)


class TestReportMoments:
    def test_matches_monte_carlo(self):
        # brute-force oracle: simulate the floor+clip+noise channel
        rng = np.random.default_rng(21)
        n = 200_000
        for s, eta, sigma in [(3.2, 0.1, 0.3), (5.5, -0.4, 0.3), (9.7, 0.5, 0.6),
                              (1.1, 0.0, 0.2), (4.9, 0.3, 1.0)]:
            draws = report(s, eta, rng.normal(0.0, sigma, n))
            mean, var = report_moments(np.array([s]), eta, sigma)
            se_mean = draws.std() / math.sqrt(n)
            assert mean[0] == pytest.approx(draws.mean(), abs=4 * se_mean + 1e-9)
            assert var[0] == pytest.approx(draws.var(), rel=0.05, abs=1e-4)

    def test_zero_sigma_degenerates_to_floor(self):
        mean, var = report_moments(np.array([4.7, 0.2, 11.0]), 0.0, 0.0)
        assert np.array_equal(mean, [4.0, 1.0, 10.0])
        assert np.array_equal(var, [0.0, 0.0, 0.0])
