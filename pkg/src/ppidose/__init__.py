"""Symptom-driven personalized PPI dosing at desk scale.

A virtual-patient gastric simulator generates hourly symptom data, a
recurrent forecaster with Monte Carlo dropout predicts symptoms with
uncertainty, and a chance-constrained receding-horizon dose search picks
minimal daily dose adjustments.
"""

from .errors import (
    ConfigurationError,
    EvaluationError,
    NumericalInstabilityError,
    PpidoseError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from .patient import (
    DEFAULT_PARAM_RANGES,
    PatientParams,
    SimState,
    basal_state,
    derivative,
    sample_patient,
    simulate_episode,
    simulate_hours,
    step_rk4,
)
from .symptoms import (
    digestion_score_continuous,
    encode_reports,
    reflux_score_continuous,
    report,
    report_moments,
)
from .meals import (
    DEFAULT_MEAL_CONFIG,
    MealGenConfig,
    MealPulse,
    evaluate,
    hourly_grid,
    sample_day_pulses,
    sample_profile,
    sample_scenarios,
)

__version__ = "0.1.0"
