"""Delayed SEIRS vector-host epidemic model.

Dimensionless parameter mapping, threshold and equilibrium analysis,
integro-delay trajectory simulation, and empirical checks of the asymptotic
extinction and permanence theory.
"""

from .analysis import (
    AnalysisReport,
    EndemicEquilibrium,
    PermanenceBounds,
    Regime,
    analyze,
    brn_constant_delays,
    brn_random_delays,
    endemic_equilibrium,
    endemic_existence_condition,
    equilibrium_function,
    equilibrium_residuals,
    espr,
    extinction_check,
    permanence_bounds,
    susceptible_floor,
)
from .diagnostics import (
    CheckEntry,
    LyapunovEstimate,
    Outcome,
    TheoremCheckReport,
    TimeAverage,
    classify_outcome,
    lyapunov_estimate,
    standard_checks,
    tail_window,
    time_average,
    verify_feasible_region,
)
from .model_core import (
    ConfigError,
    Density,
    DimensionalParams,
    DimensionlessParams,
    IncidenceModel,
    IncidenceReport,
    NumericsError,
    PointMass,
    State,
    ValidationError,
    delay_expectation,
    exp_moment,
    holling2,
    linear,
    nondimensionalize,
    quadratic_saturating,
    rescale_delay,
    saturating,
    validate_incidence,
)
from .simulator import (
    Event,
    HistoryBuffer,
    NegativityPolicy,
    SimulationConfig,
    Trajectory,
    immunity_kernel,
    init_history_constant,
    kernel_double,
    kernel_single,
    required_horizon,
    simulate,
)

__all__ = [
    "AnalysisReport", "CheckEntry", "ConfigError", "Density",
    "DimensionalParams", "DimensionlessParams", "EndemicEquilibrium", "Event",
    "HistoryBuffer", "IncidenceModel", "IncidenceReport", "LyapunovEstimate",
    "NegativityPolicy", "NumericsError", "Outcome", "PermanenceBounds",
    "PointMass", "Regime", "SimulationConfig", "State", "TheoremCheckReport",
    "TimeAverage", "Trajectory", "ValidationError", "analyze",
    "brn_constant_delays", "brn_random_delays", "classify_outcome",
    "delay_expectation", "endemic_equilibrium", "endemic_existence_condition",
    "equilibrium_function", "equilibrium_residuals", "espr",
    "exp_moment", "extinction_check", "holling2", "immunity_kernel",
    "init_history_constant", "kernel_double", "kernel_single", "linear",
    "lyapunov_estimate", "nondimensionalize", "permanence_bounds",
    "quadratic_saturating", "required_horizon", "rescale_delay", "saturating",
    "simulate", "standard_checks", "susceptible_floor", "tail_window",
    "time_average", "validate_incidence", "verify_feasible_region",
]

__version__ = "0.1.0"
