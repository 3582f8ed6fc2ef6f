"""Randomized three-meal daily intake profiles.

Intake is a sum of Gaussian pulses, three per day (breakfast, lunch,
dinner) with randomized amplitude, center jitter, and width.  Times are
measured in days; hourly profiles are point evaluations on the hour
grid.  Pulse tails are summed across day boundaries rather than being
truncated per day.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

HOURS_PER_DAY = 24


@dataclass(frozen=True)
class MealPulse:
    amplitude: float   # meal-units
    center: float      # absolute peak time, days
    spread: float      # gaussian width, days


@dataclass(frozen=True)
class MealGenConfig:
    """Sampling ranges for the daily pulses (all times in days)."""

    amp_breakfast: tuple[float, float] = (0.6, 1.2)
    amp_lunch: tuple[float, float] = (0.6, 1.5)
    amp_dinner: tuple[float, float] = (0.5, 1.8)
    nominal_centers: tuple[float, float, float] = (8.0 / 24, 12.0 / 24, 18.0 / 24)
    center_jitter: float = 1.5 / 24
    spread_range: tuple[float, float] = (0.2 / 24, 1.0 / 24)

    @property
    def amp_ranges(self) -> tuple[tuple[float, float], ...]:
        return (self.amp_breakfast, self.amp_lunch, self.amp_dinner)


DEFAULT_MEAL_CONFIG = MealGenConfig()


def sample_day_pulses(day_index: int, rng: np.random.Generator,
                      config: MealGenConfig = DEFAULT_MEAL_CONFIG) -> list[MealPulse]:
    """Three pulses for one day; draw order per meal is amplitude, jitter, width."""
    pulses = []
    for k in range(3):
        amp = rng.uniform(*config.amp_ranges[k])
        delta = rng.uniform(-config.center_jitter, config.center_jitter)
        spread = rng.uniform(*config.spread_range)
        pulses.append(MealPulse(amplitude=float(amp),
                                center=day_index + config.nominal_centers[k] + float(delta),
                                spread=float(spread)))
    return pulses


def evaluate(pulses, t):
    """Exact Gaussian-sum intake at time(s) ``t`` (days)."""
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for pulse in pulses:
        z = (t - pulse.center) / pulse.spread
        total += pulse.amplitude * np.exp(-0.5 * z * z)
    return total


def hourly_grid(n_days: int) -> np.ndarray:
    """Hour-instant time stamps in days: h/24 for h = 0..n_days*24-1."""
    return np.arange(n_days * HOURS_PER_DAY, dtype=float) / HOURS_PER_DAY


def sample_profile(n_days: int, rng: np.random.Generator,
                   config: MealGenConfig = DEFAULT_MEAL_CONFIG,
                   ) -> tuple[list[MealPulse], np.ndarray]:
    """Pulses and the hourly intake array for ``n_days`` consecutive days."""
    if n_days < 1:
        raise ConfigurationError(f"n_days must be >= 1, got {n_days}")
    pulses = []
    for day in range(n_days):
        pulses.extend(sample_day_pulses(day, rng, config))
    return pulses, evaluate(pulses, hourly_grid(n_days))


def sample_scenarios(j: int, horizon_days: int, rng: np.random.Generator,
                     config: MealGenConfig = DEFAULT_MEAL_CONFIG) -> np.ndarray:
    """J independent future-meal profiles, shape [J, horizon_days*24].

    Each scenario uses its own RNG stream split from ``rng`` so scenarios
    can be generated in parallel without changing the result.
    """
    if j < 1:
        raise ConfigurationError(f"scenario count must be >= 1, got {j}")
    streams = rng.spawn(j)
    out = np.empty((j, horizon_days * HOURS_PER_DAY), dtype=float)
    for i, stream in enumerate(streams):
        _, out[i] = sample_profile(horizon_days, stream, config)
    return out
