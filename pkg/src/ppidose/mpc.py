"""Chance-constrained receding-horizon dose search.

Candidate plans are all length-T sequences over three multiplicative
daily dose actions (x0.8 / x1.0 / x1.2, clamped to [u_min, u_max]).
Each plan is forecast under J sampled future-meal scenarios; a Gaussian
quantile bound mu + beta*sigma tightens the per-step symptom chance
constraint, rectified exceedances are summed into a violation, and the
plan score is dose usage plus the worst-case scenario violation weighted
by the penalty.  Only the first day's dose of the best plan is applied.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeMismatchError

HOURS_PER_DAY = 24

# Rational approximation coefficients for the inverse normal CDF
# (Acklam), refined below with one Halley step on erfc.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF, abs error well below 1e-9."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must be in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q
              + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r
              + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r
                + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q
               + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # one Halley refinement step
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@dataclass(frozen=True)
class MpcConfig:
    theta: float = 5.0                 # symptom threshold (score units)
    p: float = 0.9                     # chance-constraint confidence
    lam: float = 10.0                  # worst-case violation penalty weight
    c: float = 1.0                     # per-unit dose cost
    t_days: int = 3                    # horizon in daily decision intervals
    j_scenarios: int = 5               # future-meal scenarios
    action_factors: tuple[float, ...] = (0.8, 1.0, 1.2)
    u_min: float = 0.05
    u_max: float = 1.0
    enumeration_cap: int = 2187        # 3^7
    mc_passes: int = 30

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ConfigurationError(f"p must be in (0, 1), got {self.p}")
        if self.lam < 0.0 or self.c < 0.0:
            raise ConfigurationError("lam and c must be >= 0")
        if not 0.0 <= self.u_min <= self.u_max:
            raise ConfigurationError("need 0 <= u_min <= u_max")
        if self.t_days < 1 or self.j_scenarios < 1 or self.mc_passes < 1:
            raise ConfigurationError("t_days, j_scenarios, mc_passes must be >= 1")

    @property
    def beta(self) -> float:
        return normal_quantile(self.p)


@dataclass
class DosePlan:
    actions: tuple[int, ...]           # indices into action_factors, lexicographic
    doses: np.ndarray                  # absolute daily doses over the horizon
    score: float = math.nan
    worst_violation: float = math.nan
    mean_sigma: float = math.nan       # scenario-averaged predictive-sd sum (logged only)

    @property
    def usage(self) -> float:
        return float(self.doses.sum())


@dataclass
class MpcDecision:
    u_apply: np.ndarray                # next 24 hourly dose values
    plan: DosePlan
    plans: list[DosePlan] = field(repr=False, default_factory=list)
    mean_feasible_frac: float = math.nan  # offline scenario-indicator metric


def expand_candidates(current_dose: float, config: MpcConfig) -> list[DosePlan]:
    """All 3^T_days action sequences mapped to clamped absolute daily doses."""
    n_plans = len(config.action_factors) ** config.t_days
    if n_plans > config.enumeration_cap:
        raise ConfigurationError(
            f"{n_plans} candidates exceed the enumeration cap "
            f"{config.enumeration_cap}; reduce t_days")
    plans = []
    for actions in itertools.product(range(len(config.action_factors)),
                                     repeat=config.t_days):
        doses = np.empty(config.t_days)
        level = current_dose
        for t, action in enumerate(actions):
            level = min(max(level * config.action_factors[action], config.u_min),
                        config.u_max)
            doses[t] = level
        plans.append(DosePlan(actions=actions, doses=doses))
    return plans


def hourly_dose_schedule(daily_doses: np.ndarray) -> np.ndarray:
    """Daily doses as single morning boluses on the hourly grid."""
    out = np.zeros(daily_doses.shape[0] * HOURS_PER_DAY)
    out[::HOURS_PER_DAY] = daily_doses
    return out


def violation(mu: np.ndarray, sigma: np.ndarray, theta: float, beta: float) -> float:
    """Summed rectified exceedance of the quantile bound over steps and symptoms."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mu.shape != sigma.shape:
        raise ShapeMismatchError("mu and sigma shapes differ",
                                 expected=mu.shape, actual=sigma.shape)
    return float(np.sum(np.maximum(0.0, mu + beta * sigma - theta)))


def score_plan(plan: DosePlan, forecasts, config: MpcConfig) -> DosePlan:
    """Fill in usage/violation/score from per-scenario (mu, sigma) forecasts."""
    if not forecasts:
        raise ConfigurationError("at least one scenario forecast required")
    beta = config.beta
    violations = [violation(mu, sigma, config.theta, beta) for mu, sigma in forecasts]
    plan.worst_violation = max(violations)
    usage = config.c * plan.usage
    plan.score = usage + config.lam * plan.worst_violation
    plan.mean_sigma = float(np.mean([np.sum(sigma) for _, sigma in forecasts]))
    return plan


@dataclass
class HistoryWindow:
    """Most recent T_hist hours of observations fed to the predictor."""

    symptoms: np.ndarray   # [t_hist, 2] integer reports
    meals: np.ndarray      # [t_hist] raw meal intensity
    doses: np.ndarray      # [t_hist] raw hourly doses


def solve(history: HistoryWindow, predictor, scenario_sampler,
          config: MpcConfig, rng: np.random.Generator) -> MpcDecision:
    """Score every candidate under every scenario; apply the best first action.

    ``predictor(hist_symptoms, hist_meals, hist_doses, future_meals,
    future_doses, rng)`` must return per-step (mu, sigma) in score units
    for the T_days*24 future hours.  ``scenario_sampler(j, horizon_days,
    rng)`` returns J future hourly meal arrays.  Per-scenario predictor
    seeds are shared across candidates (common random numbers), so
    candidate comparison is noise-free while scenarios stay independent;
    everything is deterministic given ``rng``.
    """
    current_dose = float(np.asarray(history.doses)[-HOURS_PER_DAY:].sum())
    plans = expand_candidates(current_dose, config)
    scen_rng = rng.spawn(1)[0]
    scenarios = scenario_sampler(config.j_scenarios, config.t_days, scen_rng)
    scenarios = np.asarray(scenarios, dtype=float)
    seeds = [int(s) for s in rng.integers(0, 2**63, size=config.j_scenarios)]

    scored: list[tuple[tuple, DosePlan, list]] = []
    for plan in plans:
        dose_hourly = hourly_dose_schedule(plan.doses)
        forecasts = []
        for j in range(config.j_scenarios):
            mu, sigma = predictor(history.symptoms, history.meals, history.doses,
                                  scenarios[j], dose_hourly,
                                  np.random.default_rng(seeds[j]))
            forecasts.append((np.asarray(mu, dtype=float),
                              np.asarray(sigma, dtype=float)))
        score_plan(plan, forecasts, config)
        # tie-break: lower usage, then lexicographically smaller action sequence
        scored.append(((plan.score, plan.usage, plan.actions), plan, forecasts))

    key, best, best_forecasts = min(scored, key=lambda item: item[0])
    u_apply = np.zeros(HOURS_PER_DAY)
    u_apply[0] = best.doses[0]

    # offline chance metric: scenario fraction with mean forecast under the
    # threshold, worst case over steps and symptoms (never used in scoring)
    mu_stack = np.stack([mu for mu, _ in best_forecasts])
    feasible = (mu_stack <= config.theta).mean(axis=0)
    return MpcDecision(u_apply=u_apply, plan=best,
                       plans=[item[1] for item in scored],
                       mean_feasible_frac=float(feasible.min()))
