"""Virtual gastric patient: a reduced-order acid/pump/drug ODE.

Three states evolve in continuous time (hours):

    C  plasma drug concentration      dC/dt = -k_e*C + dose_rate
    P  active proton-pump fraction    dP/dt = k_rec*(1 - P) - k_bind*C*P
    A  luminal acid level             dA/dt = P*(s0 + s_meal*meal) - k_A*A

Meals stimulate secretion, the drug knocks out pumps, pumps regenerate
slowly, and acid washes out of the compartment at rate k_A.  Integration
is classical fixed-step RK4 with post-step clamping (P to [0,1], A and C
to >= 0).  Hourly inputs are held constant over each hour (zero-order
hold); an administered dose u is delivered as a constant infusion over
the first ``dt_absorb`` hours of its slot.

Per-patient parameters are drawn independently and uniformly from
``DEFAULT_PARAM_RANGES``.  The ranges were tuned numerically so that for
nearly all patients (a) zero dosing under sustained meals pushes acid
above the reflux threshold a_high and (b) a sustained maximal daily dose
pushes acid below the digestive threshold a_low, i.e. both symptom
regimes are reachable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigurationError, NumericalInstabilityError, ShapeMismatchError


@dataclass(frozen=True)
class PatientParams:
    """Physiological and symptom-encoder parameters of one virtual patient."""

    k_e: float          # drug elimination rate (1/h)
    k_bind: float       # pump inactivation rate per unit drug concentration (1/h)
    k_rec: float        # pump regeneration rate (1/h)
    s0: float           # basal acid secretion (acid-units/h)
    s_meal: float       # meal-stimulated secretion gain (acid-units/h per meal-unit)
    k_A: float          # luminal washout rate (1/h)
    a_high: float       # acid threshold above which reflux symptoms rise
    a_low: float        # acid threshold below which digestive symptoms rise
    k_r: float          # reflux sigmoid steepness (1/acid-unit)
    k_d: float          # digestion sigmoid steepness (1/acid-unit)
    eta_r: float        # fixed per-patient reflux report offset (score-units)
    eta_d: float        # fixed per-patient digestion report offset (score-units)
    sigma_noise: float  # per-report noise standard deviation (score-units)

    def __post_init__(self):
        for name in ("k_e", "k_bind", "k_rec", "s_meal", "k_A", "k_r", "k_d"):
            if getattr(self, name) <= 0.0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.s0 < 0.0:
            raise ConfigurationError(f"s0 must be >= 0, got {self.s0}")
        if self.sigma_noise < 0.0:
            raise ConfigurationError(f"sigma_noise must be >= 0, got {self.sigma_noise}")
        if not self.a_low < self.a_high:
            raise ConfigurationError(
                f"a_low must be < a_high, got a_low={self.a_low}, a_high={self.a_high}")


@dataclass(frozen=True)
class SimState:
    """ODE state at one instant."""

    A: float  # gastric acid level (acid-units, >= 0)
    P: float  # active pump fraction, in [0, 1]
    C: float  # plasma drug concentration (dose-units, >= 0)


PARAM_NAMES = tuple(f.name for f in fields(PatientParams))

# Tuned so both symptom regimes are reachable for >= 95% of draws
# (see tests for the steady-state checks).  Pump regeneration is slow
# relative to daily dosing, matching the irreversible-blockade mechanism.
DEFAULT_PARAM_RANGES: dict[str, tuple[float, float]] = {
    "k_e": (0.4, 0.7),
    "k_bind": (0.5, 0.95),
    "k_rec": (0.006, 0.014),
    "s0": (0.9, 1.1),
    "s_meal": (1.2, 3.0),
    "k_A": (0.9, 1.1),
    "a_high": (1.6, 2.2),
    "a_low": (0.25, 0.4),
    "k_r": (2.5, 5.0),
    "k_d": (2.5, 5.0),
    "eta_r": (-0.5, 0.5),
    "eta_d": (-0.5, 0.5),
    "sigma_noise": (0.3, 0.3),
}

DEFAULT_DT_SUB = 0.05     # integration sub-step, hours
DEFAULT_DT_ABSORB = 1.0   # dose absorption window, hours


def sample_patient(rng_seed, ranges: dict[str, tuple[float, float]] | None = None) -> PatientParams:
    """Draw one patient, each field independently uniform from its range.

    Deterministic given the seed.  ``ranges`` may override any subset of
    ``DEFAULT_PARAM_RANGES``; a degenerate range [x, x] pins the field.
    """
    merged = dict(DEFAULT_PARAM_RANGES)
    if ranges is not None:
        unknown = set(ranges) - set(PARAM_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown parameter range keys: {sorted(unknown)}")
        merged.update(ranges)
    for name, (lo, hi) in merged.items():
        if lo > hi:
            raise ConfigurationError(f"range for {name} has lower > upper: [{lo}, {hi}]")
    rng = np.random.default_rng(rng_seed)
    draws = {name: float(rng.uniform(*merged[name])) for name in PARAM_NAMES}
    return PatientParams(**draws)


def basal_state(params: PatientParams) -> SimState:
    """Untreated zero-meal steady state: A = s0/k_A, all pumps active, no drug."""
    return SimState(A=params.s0 / params.k_A, P=1.0, C=0.0)


def derivative(state: SimState, meal: float, dose_rate: float,
               params: PatientParams) -> tuple[float, float, float]:
    """Right-hand side (dA/dt, dP/dt, dC/dt) at the given state and inputs."""
    if meal < 0.0 or dose_rate < 0.0:
        raise ConfigurationError("meal and dose_rate must be >= 0")
    return _deriv(state.A, state.P, state.C, meal, dose_rate, params)


def _deriv(a, p, c, meal, rate, pp):
    dc = -pp.k_e * c + rate
    dp = pp.k_rec * (1.0 - p) - pp.k_bind * c * p
    da = p * (pp.s0 + pp.s_meal * meal) - pp.k_A * a
    return da, dp, dc


def _rk4(a, p, c, meal, rate, pp, dt):
    """One clamped RK4 step on scalar state, inputs held constant."""
    da1, dp1, dc1 = _deriv(a, p, c, meal, rate, pp)
    h = 0.5 * dt
    da2, dp2, dc2 = _deriv(a + h * da1, p + h * dp1, c + h * dc1, meal, rate, pp)
    da3, dp3, dc3 = _deriv(a + h * da2, p + h * dp2, c + h * dc2, meal, rate, pp)
    da4, dp4, dc4 = _deriv(a + dt * da3, p + dt * dp3, c + dt * dc3, meal, rate, pp)
    s = dt / 6.0
    a += s * (da1 + 2.0 * (da2 + da3) + da4)
    p += s * (dp1 + 2.0 * (dp2 + dp3) + dp4)
    c += s * (dc1 + 2.0 * (dc2 + dc3) + dc4)
    # clamp to the physical region after each step
    if a < 0.0:
        a = 0.0
    if c < 0.0:
        c = 0.0
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    return a, p, c


def step_rk4(state: SimState, inputs: tuple[float, float], params: PatientParams,
             dt: float) -> SimState:
    """Advance the state by ``dt`` hours with (meal, dose_rate) held constant."""
    if dt <= 0.0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    meal, rate = inputs
    if meal < 0.0 or rate < 0.0:
        raise ConfigurationError("meal and dose_rate must be >= 0")
    a, p, c = _rk4(state.A, state.P, state.C, meal, rate, params, dt)
    for name, value in (("A", a), ("P", p), ("C", c)):
        if not math.isfinite(value):
            raise NumericalInstabilityError(name, value)
    return SimState(A=a, P=p, C=c)


def _substeps_per_hour(dt_sub: float) -> int:
    if dt_sub <= 0.0:
        raise ConfigurationError(f"dt_sub must be > 0, got {dt_sub}")
    n = round(1.0 / dt_sub)
    if n < 1 or abs(n * dt_sub - 1.0) > 1e-9:
        raise ConfigurationError(f"dt_sub={dt_sub} does not divide 1 hour")
    return n


def simulate_hours(state: SimState, meal_series, dose_series, params: PatientParams,
                   dt_sub: float = DEFAULT_DT_SUB,
                   dt_absorb: float = DEFAULT_DT_ABSORB) -> tuple[np.ndarray, SimState]:
    """Integrate over hourly input slots, returning end-of-hour acid levels.

    ``dose_series[h]`` is the dose administered in hour ``h``; it enters
    as a constant infusion of ``dose/dt_absorb`` over the first
    ``dt_absorb`` hours of the slot.  Returns the acid level recorded at
    the end of each hour and the final state, so simulations can be
    resumed (the closed-loop runner relies on this).
    """
    meals = np.asarray(meal_series, dtype=float)
    doses = np.asarray(dose_series, dtype=float)
    if meals.shape != doses.shape or meals.ndim != 1:
        raise ShapeMismatchError("meal and dose series must be equal-length 1-D arrays",
                                 expected=meals.shape, actual=doses.shape)
    if np.any(meals < 0.0) or np.any(doses < 0.0):
        raise ConfigurationError("meal and dose series must be >= 0")
    if not (0.0 < dt_absorb <= 1.0):
        raise ConfigurationError(f"dt_absorb must be in (0, 1], got {dt_absorb}")
    n_sub = _substeps_per_hour(dt_sub)
    absorb_steps = round(dt_absorb / dt_sub)

    a, p, c = state.A, state.P, state.C
    acid = np.empty(meals.shape[0], dtype=float)
    for h in range(meals.shape[0]):
        meal = float(meals[h])
        rate = float(doses[h]) / dt_absorb
        for s in range(n_sub):
            a, p, c = _rk4(a, p, c, meal, rate if s < absorb_steps else 0.0,
                           params, dt_sub)
        if not (math.isfinite(a) and math.isfinite(p) and math.isfinite(c)):
            for name, value in (("A", a), ("P", p), ("C", c)):
                if not math.isfinite(value):
                    raise NumericalInstabilityError(name, value)
        acid[h] = a
    return acid, SimState(A=a, P=p, C=c)


def simulate_episode(params: PatientParams, meal_series, dose_series,
                     dt_sub: float = DEFAULT_DT_SUB,
                     initial_state: SimState | None = None,
                     dt_absorb: float = DEFAULT_DT_ABSORB) -> np.ndarray:
    """Hourly acid trace for one episode, starting from the basal state."""
    if initial_state is None:
        initial_state = basal_state(params)
    acid, _ = simulate_hours(initial_state, meal_series, dose_series, params,
                             dt_sub=dt_sub, dt_absorb=dt_absorb)
    return acid
