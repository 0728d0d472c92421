"""Post-processing of trajectories against the asymptotic theory.

Estimates the exponential decay rate of the infectious state, running time
averages, feasible-region invariance, and the long-run outcome class.  The
limits in the theory are asymptotic; here they are approximated on a finite
tail window (by default the last quarter of the run), with liminf/limsup
replaced by min/max over that window.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .analysis import AnalysisReport, PermanenceBounds, Regime
from .model_core import DimensionlessParams, ValidationError
from .simulator import Trajectory

# Finite-time slack on the decay-rate bound: the transient term log(I(0))/t
# of the Lyapunov estimate has roughly this magnitude at the default horizon.
DEFAULT_LYAPUNOV_MARGIN = 0.02

# Band around B/mu accepted for the susceptible running mean at the horizon.
DEFAULT_MEAN_BAND = 0.1

DEFAULT_EPSILON_EXTINCT = 1e-3

TAIL_FRACTION = 0.25


class Outcome(enum.Enum):
    """Long-run classification of a finite trajectory."""

    EXTINCT = "Extinct"
    WEAKLY_PERMANENT_IN_MEAN = "WeaklyPermanentInMean"
    STRONGLY_PERMANENT_IN_MEAN = "StronglyPermanentInMean"
    PERMANENT_FLOOR = "PermanentFloor"
    UNDETERMINED = "Undetermined"


def tail_window(traj: Trajectory, fraction: float = TAIL_FRACTION) -> Tuple[float, float]:
    """Default analysis window: the trailing fraction of the run."""
    t_end = traj.t_end
    return ((1.0 - fraction) * t_end, t_end)


def _window_slice(traj: Trajectory, window: Optional[Tuple[float, float]]) -> slice:
    if window is None:
        window = tail_window(traj)
    t_a, t_b = window
    if t_a >= t_b:
        raise ValidationError(f"window must satisfy t_a < t_b, got {window!r}")
    if t_a < traj.times[0] - 1e-12 or t_b > traj.times[-1] + 1e-12:
        raise ValidationError(
            f"window {window!r} falls outside the trajectory span "
            f"[{traj.times[0]:.6g}, {traj.times[-1]:.6g}]")
    lo = int(np.searchsorted(traj.times, t_a - 1e-12))
    hi = int(np.searchsorted(traj.times, t_b + 1e-12))
    return slice(lo, hi)


# ============================================================================
# Lyapunov-rate estimate
# ============================================================================

@dataclass(frozen=True)
class LyapunovEstimate:
    """Samples of (1/t) log I(t) on a window, and the value at its end."""

    times: np.ndarray
    values: np.ndarray
    tail_value: float
    window: Tuple[float, float]


def lyapunov_estimate(traj: Trajectory,
                      window: Optional[Tuple[float, float]] = None) -> LyapunovEstimate:
    """Estimate the exponential rate of I(t) as (1/t) log I(t).

    For a decaying state the tail value bounds the true Lyapunov exponent
    from above up to a transient log(I(0))/t term.  Requires I > 0 (and
    t > 0) throughout the window.
    """
    if window is None:
        window = tail_window(traj)
    sl = _window_slice(traj, window)
    t = traj.times[sl]
    i = traj.I[sl]
    positive = t > 0
    t, i = t[positive], i[positive]
    if len(t) == 0:
        raise ValidationError("window contains no samples at positive times")
    if np.any(i <= 0.0):
        k = int(np.argmax(i <= 0.0))
        raise ValidationError(
            f"I(t) is not positive at t={t[k]:.6g}; the log-rate is undefined there")
    values = np.log(i) / t
    return LyapunovEstimate(times=t, values=values,
                            tail_value=float(values[-1]), window=window)


# ============================================================================
# Running time averages
# ============================================================================

@dataclass(frozen=True)
class TimeAverage:
    """Running mean (1/t) integral of a component, sampled on a window."""

    times: np.ndarray
    values: np.ndarray
    final: float
    component: str
    window: Tuple[float, float]


def time_average(traj: Trajectory, component: str = "S",
                 window: Optional[Tuple[float, float]] = None) -> TimeAverage:
    """Trapezoid running mean of one component from the start of the run.

    The mean is always accumulated from t = 0; the window only selects which
    samples of the running mean are reported.
    """
    if window is None:
        window = (0.0, traj.t_end)
    x = traj.component(component)
    t = traj.times
    increments = 0.5 * (x[1:] + x[:-1]) * np.diff(t)
    cumulative = np.concatenate(([0.0], np.cumsum(increments)))
    with np.errstate(divide="ignore", invalid="ignore"):
        running = np.where(t > 0, cumulative / np.where(t > 0, t, 1.0), x[0])
    sl = _window_slice(traj, window)
    return TimeAverage(times=t[sl], values=running[sl],
                       final=float(running[sl][-1]) if sl.stop > sl.start else float("nan"),
                       component=component, window=window)


# ============================================================================
# Check entries and reports
# ============================================================================

@dataclass(frozen=True)
class CheckEntry:
    """One empirical check of an asymptotic statement."""

    name: str
    theorem: str
    target: float
    observed: float
    tolerance: float
    passed: bool
    window: Optional[Tuple[float, float]]
    detail: str = ""

    def render(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        win = (f" window=[{self.window[0]:.6g},{self.window[1]:.6g}]"
               if self.window else "")
        extra = f" ({self.detail})" if self.detail else ""
        return (f"{status} {self.name} [{self.theorem}]: observed={self.observed!r} "
                f"target={self.target!r} tol={self.tolerance!r}{win}{extra}")


@dataclass(frozen=True)
class TheoremCheckReport:
    """Collection of empirical theorem checks for one trajectory."""

    entries: Tuple[CheckEntry, ...]

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, name: str) -> CheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def render_text(self) -> str:
        return "\n".join(e.render() for e in self.entries)

    def render_kv(self) -> str:
        lines = []
        for e in self.entries:
            key = e.name
            lines.append(f"check.{key}.passed = {str(e.passed).lower()}")
            lines.append(f"check.{key}.observed = {e.observed!r}")
            lines.append(f"check.{key}.target = {e.target!r}")
            lines.append(f"check.{key}.tolerance = {e.tolerance!r}")
        return "\n".join(lines)


# ============================================================================
# Individual checks
# ============================================================================

def verify_feasible_region(traj: Trajectory, p: DimensionlessParams) -> CheckEntry:
    """Check nonnegativity, the N <= B/mu ceiling, and one-way entry.

    The ceiling and floor carry a 10*dt slack for the explicit-Euler
    overshoot.  One-way entry: once N reaches B/(mu+d), it must never fall
    below B/(mu+d) - 10*dt again.
    """
    slack = 10.0 * traj.dt
    ceiling = p.s0 + slack
    floor = p.B / (p.mu + p.d)

    detail = ""
    passed = True
    observed = float(np.max(traj.N))

    for name in ("S", "E", "I", "R"):
        x = traj.component(name)
        if np.any(x < 0):
            k = int(np.argmax(x < 0))
            passed = False
            detail = f"{name} negative at index {k} (t={traj.times[k]:.6g})"
            break

    if passed and observed > ceiling:
        k = int(np.argmax(traj.N > ceiling))
        passed = False
        detail = f"N exceeds B/mu + 10*dt at index {k} (t={traj.times[k]:.6g})"

    if passed:
        entered = np.nonzero(traj.N >= floor)[0]
        if len(entered) > 0:
            after = traj.N[entered[0]:]
            drops = after < floor - slack
            if np.any(drops):
                k = int(entered[0] + np.argmax(drops))
                passed = False
                detail = f"N re-exits the trapping band at index {k} (t={traj.times[k]:.6g})"

    return CheckEntry(
        name="feasible_region",
        theorem="feasible-region self-invariance",
        target=p.s0, observed=observed, tolerance=slack,
        passed=passed, window=(float(traj.times[0]), traj.t_end), detail=detail)


def classify_outcome(traj: Trajectory,
                     epsilon_extinct: float = DEFAULT_EPSILON_EXTINCT,
                     floor: Optional[float] = None,
                     window: Optional[Tuple[float, float]] = None) -> Outcome:
    """Classify the long-run behavior from the tail of a trajectory.

    Extinct when the tail maximum of I sits below epsilon_extinct;
    PermanentFloor when a floor is supplied and the tail minimum stays at or
    above it; otherwise the mean-permanence labels compare the tail of the
    running mean of I against epsilon_extinct (min for strong, max for weak).
    Raising epsilon_extinct can only move outcomes toward Extinct, never away.
    """
    if epsilon_extinct <= 0:
        raise ValidationError(f"epsilon_extinct must be positive, got {epsilon_extinct!r}")
    if window is None:
        window = tail_window(traj)
    sl = _window_slice(traj, window)
    i_tail = traj.I[sl]
    if len(i_tail) == 0:
        raise ValidationError("window contains no samples")

    if float(np.max(i_tail)) < epsilon_extinct:
        return Outcome.EXTINCT
    if floor is not None and float(np.min(i_tail)) >= floor:
        return Outcome.PERMANENT_FLOOR
    means = time_average(traj, "I", window).values
    if float(np.min(means)) > epsilon_extinct:
        return Outcome.STRONGLY_PERMANENT_IN_MEAN
    if float(np.max(means)) > epsilon_extinct:
        return Outcome.WEAKLY_PERMANENT_IN_MEAN
    return Outcome.UNDETERMINED


# ============================================================================
# Standard check suite
# ============================================================================

def standard_checks(traj: Trajectory, p: DimensionlessParams,
                    analysis: AnalysisReport,
                    bounds: Optional[PermanenceBounds] = None,
                    lyapunov_margin: float = DEFAULT_LYAPUNOV_MARGIN,
                    mean_band: float = DEFAULT_MEAN_BAND,
                    epsilon_extinct: float = DEFAULT_EPSILON_EXTINCT
                    ) -> TheoremCheckReport:
    """Run the default empirical checks a finished run is judged against.

    Always checks feasible-region invariance.  In the extinction regimes it
    additionally checks the decay-rate bound, the susceptible running mean
    against B/mu, and the Extinct classification.  Around an endemic state
    (permanence bounds available) it checks the infectious floor instead.
    """
    window = tail_window(traj)
    entries = [verify_feasible_region(traj, p)]

    if bounds is None:
        bounds = analysis.permanence

    if analysis.lam is not None:
        target = -analysis.lam + lyapunov_margin
        i_win = traj.I[_window_slice(traj, window)]
        if np.any(i_win <= 0.0):
            entries.append(CheckEntry(
                name="lyapunov_tail", theorem="exponential extinction of infection",
                target=target, observed=float("-inf"), tolerance=lyapunov_margin,
                passed=True, window=window, detail="I reached zero inside the window"))
        else:
            tail = lyapunov_estimate(traj, window).tail_value
            entries.append(CheckEntry(
                name="lyapunov_tail", theorem="exponential extinction of infection",
                target=target, observed=tail, tolerance=lyapunov_margin,
                passed=tail <= target, window=window,
                detail=f"rate bound -lambda = {-analysis.lam!r}"))

        s_mean = time_average(traj, "S").final
        entries.append(CheckEntry(
            name="susceptible_mean", theorem="mean persistence of the susceptible state",
            target=p.s0, observed=s_mean, tolerance=mean_band,
            passed=abs(s_mean - p.s0) <= mean_band, window=(0.0, traj.t_end)))

        outcome = classify_outcome(traj, epsilon_extinct, window=window)
        entries.append(CheckEntry(
            name="classification", theorem="extinction of the infectious state",
            target=0.0, observed=float(np.max(traj.I[_window_slice(traj, window)])),
            tolerance=epsilon_extinct, passed=outcome is Outcome.EXTINCT,
            window=window, detail=f"classified {outcome.value}"))
    elif bounds is not None:
        i_tail = traj.I[_window_slice(traj, window)]
        floor_obs = float(np.min(i_tail))
        outcome = classify_outcome(traj, epsilon_extinct, floor=bounds.v2, window=window)
        entries.append(CheckEntry(
            name="infectious_floor", theorem="strong permanence of infection",
            target=bounds.v2, observed=floor_obs, tolerance=0.0,
            passed=(floor_obs >= bounds.v2) and outcome is Outcome.PERMANENT_FLOOR,
            window=window, detail=f"classified {outcome.value}"))
        s_tail = traj.S[_window_slice(traj, window)]
        entries.append(CheckEntry(
            name="susceptible_floor", theorem="persistence of susceptibility",
            target=bounds.v1, observed=float(np.min(s_tail)), tolerance=0.0,
            passed=float(np.min(s_tail)) >= bounds.v1, window=window))
    else:
        outcome = classify_outcome(traj, epsilon_extinct, window=window)
        entries.append(CheckEntry(
            name="classification", theorem="no applicable asymptotic guarantee",
            target=float("nan"), observed=float(np.max(traj.I[_window_slice(traj, window)])),
            tolerance=epsilon_extinct, passed=True, window=window,
            detail=f"classified {outcome.value}"))

    return TheoremCheckReport(tuple(entries))
