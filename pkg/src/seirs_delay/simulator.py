"""Forward integration of the four-equation delayed SEIRS system.

The scheme is explicit Euler on a uniform grid with full history management:
delay terms are evaluated by quadrature against the delay densities, with
linear interpolation of the stored history between grid points.  Delay
quadrature nodes follow each spec's own node set rather than the time grid,
so quadrature accuracy is decoupled from the step size.

A single run is inherently sequential (every step reads the accumulated
history); distinct runs share no state and can execute concurrently.
"""

from __future__ import annotations

import enum
import math
from array import array
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .model_core import (
    ConfigError,
    DelaySpec,
    DimensionlessParams,
    IncidenceModel,
    NumericsError,
    PointMass,
    State,
    ValidationError,
)


class NegativityPolicy(enum.Enum):
    """What to do when an Euler step drives a component below zero."""

    ERROR = "Error"
    CLAMP_WITH_WARNING = "ClampWithWarning"


MAX_LOGGED_CLAMPS = 100


@dataclass(frozen=True)
class Event:
    """One line of the run's event log."""

    step: int
    t: float
    kind: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] step={self.step} t={self.t:.6g}: {self.message}"


# ============================================================================
# History
# ============================================================================

_COMPONENTS = {"S": 0, "E": 1, "I": 2, "R": 3}


class HistoryBuffer:
    """Uniform-grid samples of (S, E, I, R) on [t_start, t_last].

    The grid spacing is constant; lookups between grid points interpolate
    linearly.  Reading before t_start raises, naming the horizon the caller
    would have needed.
    """

    def __init__(self, t_start: float, dt: float,
                 S: Sequence[float], E: Sequence[float],
                 I: Sequence[float], R: Sequence[float]):
        if dt <= 0:
            raise ValidationError(f"dt must be positive, got {dt!r}")
        arrays = [np.asarray(a, dtype=float) for a in (S, E, I, R)]
        n = len(arrays[0])
        if n < 2 or any(len(a) != n for a in arrays):
            raise ValidationError("history components must share a length of at least 2")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValidationError("history samples must be finite")
        self.t_start = float(t_start)
        self.dt = float(dt)
        self._data = arrays

    @property
    def t_last(self) -> float:
        return self.t_start + (len(self._data[0]) - 1) * self.dt

    def _index(self, t) -> np.ndarray:
        j = (np.asarray(t, dtype=float) - self.t_start) / self.dt
        if np.any(j < -1e-9):
            t_min = float(np.min(np.asarray(t, dtype=float)))
            raise ConfigError(
                f"history lookup at t={t_min:.6g} precedes the buffer start "
                f"{self.t_start:.6g}; the run needs a history horizon of at least "
                f"{self.t_last - t_min:.6g}")
        if np.any(j > len(self._data[0]) - 1 + 1e-9):
            raise ConfigError("history lookup beyond the last stored sample")
        return np.clip(j, 0.0, len(self._data[0]) - 1)

    def values(self, component: str, t) -> np.ndarray:
        """Linearly interpolated samples of one component at times t."""
        a = self._data[_COMPONENTS[component]]
        j = self._index(t)
        k = np.floor(j).astype(int)
        k2 = np.minimum(k + 1, len(a) - 1)
        f = j - k
        return a[k] * (1.0 - f) + a[k2] * f

    def value(self, component: str, t: float) -> float:
        return float(self.values(component, t))

    def component(self, component: str) -> Callable[[np.ndarray], np.ndarray]:
        """A vectorized view of one component as a function of time."""
        return lambda t: self.values(component, t)


def required_horizon(delays: Tuple[DelaySpec, DelaySpec, DelaySpec]) -> float:
    """Largest look-back the kernels can request: max(h1 + h2, h3)."""
    t1, t2, t3 = delays
    return max(t1.horizon + t2.horizon, t3.horizon)


def init_history_constant(fractions: State,
                          delays: Tuple[DelaySpec, DelaySpec, DelaySpec],
                          dt: float) -> HistoryBuffer:
    """Constant pre-start history on [-T_max, 0] at grid spacing dt.

    The fractions must sum to at most 1 (they are shares of the carrying
    capacity).  Zero entries are tolerated; the well-posedness theory assumes
    strictly positive data, and the infectious state then simply stays zero.
    """
    if fractions.N > 1.0 + 1e-9:
        raise ValidationError(
            f"initial fractions sum to {fractions.N:.6g}, above the unit ceiling")
    t_max = required_horizon(delays)
    n_hist = max(int(math.ceil(t_max / dt)) + 1, 2)
    s, e, i, r = fractions.as_tuple()
    n = n_hist + 1
    return HistoryBuffer(-n_hist * dt, dt,
                         [s] * n, [e] * n, [i] * n, [r] * n)


# ============================================================================
# Delay kernels
# ============================================================================

HistoryFn = Union[Callable[[np.ndarray], np.ndarray], HistoryBuffer]


def _as_fn(history, component: str) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(history, HistoryBuffer):
        return history.component(component)
    return history


def kernel_single(history_I: HistoryFn, t1: DelaySpec, mu_v: float,
                  G: IncidenceModel, t: float) -> float:
    """Infection pressure integral: E over T1 of e^(-mu_v s) G(I(t - s)).

    Point-mass delays reduce to e^(-mu_v T1) * G(I(t - T1)) with the history
    interpolated linearly between grid points.
    """
    hI = _as_fn(history_I, "I")
    nodes, w = t1.quadrature()
    vals = w * np.exp(-mu_v * nodes) * np.asarray(G(hI(t - nodes)), dtype=float)
    out = float(vals.sum())
    if not math.isfinite(out):
        raise NumericsError(f"kernel_single non-finite at t={t:.6g}")
    return out


def kernel_double(history_S: HistoryFn, history_I: HistoryFn,
                  t1: DelaySpec, t2: DelaySpec, mu_v: float, mu: float,
                  G: IncidenceModel, t: float) -> float:
    """Two-stage incubation integral:

        E over (T1, T2) of e^(-mu_v s - mu u) S(t - u) G(I(t - s - u)).

    Tensor-product quadrature over both supports; point masses collapse
    their dimension to a single node.
    """
    hS = _as_fn(history_S, "S")
    hI = _as_fn(history_I, "I")
    s_nodes, w1 = t1.quadrature()
    u_nodes, w2 = t2.quadrature()
    f1 = w1 * np.exp(-mu_v * s_nodes)
    f2 = w2 * np.exp(-mu * u_nodes)
    s_vals = np.asarray(hS(t - u_nodes), dtype=float)
    lags = s_nodes[:, None] + u_nodes[None, :]
    g_vals = np.asarray(G(hI(t - lags)), dtype=float)
    out = float(f1 @ g_vals @ (f2 * s_vals))
    if not math.isfinite(out):
        raise NumericsError(f"kernel_double non-finite at t={t:.6g}")
    return out


def immunity_kernel(history_I: HistoryFn, t3: DelaySpec, mu: float,
                    t: float) -> float:
    """Immunity-loss return flow: E over T3 of e^(-mu r) I(t - r)."""
    hI = _as_fn(history_I, "I")
    nodes, w = t3.quadrature()
    vals = w * np.exp(-mu * nodes) * np.asarray(hI(t - nodes), dtype=float)
    out = float(vals.sum())
    if not math.isfinite(out):
        raise NumericsError(f"immunity_kernel non-finite at t={t:.6g}")
    return out


# ============================================================================
# Configuration and trajectory
# ============================================================================

HistoryInit = Union[State, HistoryBuffer, Callable[[float], Tuple[float, float, float, float]]]


@dataclass(frozen=True)
class SimulationConfig:
    """Settings for one forward run starting at t0 = 0.

    history may be a State (held constant on [-T_max, 0]), a HistoryBuffer
    (resampled onto the run grid if its spacing differs), or a callable
    t -> (S, E, I, R) evaluated on the pre-start grid.
    """

    history: HistoryInit
    dt: float = 1e-3
    t_end: float = 1000.0
    negativity: NegativityPolicy = NegativityPolicy.ERROR

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValidationError(f"t_end must be positive, got {self.t_end!r}")


@dataclass(frozen=True)
class Trajectory:
    """Time grid and state series of one completed run."""

    times: np.ndarray
    S: np.ndarray
    E: np.ndarray
    I: np.ndarray
    R: np.ndarray
    dt: float
    events: Tuple[Event, ...] = ()
    max_conservation_gap: float = 0.0
    clamp_count: int = 0
    N: np.ndarray = field(init=False)

    def __post_init__(self):
        n = len(self.times)
        for name in ("S", "E", "I", "R"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"{name} series length differs from the time grid")
        object.__setattr__(self, "N", self.S + self.E + self.I + self.R)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def component(self, name: str) -> np.ndarray:
        if name == "N":
            return self.N
        return getattr(self, name)

    def to_csv(self, path, stride: int = 1) -> None:
        """Write t,S,E,I,R,N rows, thinned to every stride-th sample.

        The final sample is always included.  Values use the shortest
        round-tripping decimal form, so identical runs give identical files.
        """
        if stride < 1:
            raise ValidationError(f"stride must be at least 1, got {stride!r}")
        idx = list(range(0, len(self.times), stride))
        if idx[-1] != len(self.times) - 1:
            idx.append(len(self.times) - 1)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,S,E,I,R,N\n")
            for k in idx:
                row = (float(self.times[k]), float(self.S[k]), float(self.E[k]),
                       float(self.I[k]), float(self.R[k]), float(self.N[k]))
                fh.write(",".join(repr(v) for v in row) + "\n")

    def events_text(self) -> str:
        return "\n".join(str(e) for e in self.events)


# ============================================================================
# Integration
# ============================================================================

def _initial_history_arrays(cfg: SimulationConfig,
                            delays: Tuple[DelaySpec, DelaySpec, DelaySpec]
                            ) -> Tuple[int, List[array]]:
    """Sample the configured pre-start history onto the run grid."""
    dt = cfg.dt
    t_max = required_horizon(delays)
    n_hist = max(int(math.ceil(t_max / dt)) + 1, 2)
    grid = np.arange(-n_hist, 1) * dt

    hist = cfg.history
    if isinstance(hist, State):
        if hist.N > 1.0 + 1e-9:
            raise ValidationError(
                f"initial fractions sum to {hist.N:.6g}, above the unit ceiling")
        cols = [np.full(n_hist + 1, v) for v in hist.as_tuple()]
    elif isinstance(hist, HistoryBuffer):
        if hist.t_start > grid[0] + 1e-12 or hist.t_last < -1e-12:
            raise ConfigError(
                f"history buffer spans [{hist.t_start:.6g}, {hist.t_last:.6g}] but the "
                f"delays require coverage of [{grid[0]:.6g}, 0]")
        cols = [hist.values(c, np.minimum(grid, hist.t_last)) for c in "SEIR"]
    elif callable(hist):
        samples = np.asarray([hist(float(t)) for t in grid], dtype=float)
        if samples.shape != (n_hist + 1, 4):
            raise ValidationError("history callable must return (S, E, I, R) tuples")
        cols = [samples[:, k] for k in range(4)]
    else:
        raise ValidationError(f"unsupported history initializer: {hist!r}")

    for col, name in zip(cols, "SEIR"):
        if not np.all(np.isfinite(col)) or np.any(col < 0):
            raise ValidationError(f"history for {name} must be finite and nonnegative")
    return n_hist, [array("d", col) for col in cols]


def simulate(p: DimensionlessParams, G: IncidenceModel,
             delays: Tuple[DelaySpec, DelaySpec, DelaySpec],
             cfg: SimulationConfig, _force_generic: bool = False) -> Trajectory:
    """Integrate the delayed system with explicit Euler steps.

    Per step, with K1 = kernel_single, K2 = kernel_double and
    K3 = immunity_kernel evaluated at the current time:

        dS = [B - beta*S*K1 - mu*S + alpha*K3] dt
        dE = [beta*S*K1 - mu*E - beta*K2] dt
        dI = [beta*K2 - (mu+d+alpha)*I] dt
        dR = [alpha*I - mu*R - alpha*K3] dt

    The four right-hand sides telescope to dN = [B - mu*N - d*I] dt; the
    largest per-step deviation from that identity is tracked on the returned
    trajectory (it should sit at rounding level).

    Runs where every delay is a point mass use a tight scalar loop; density
    delays take a vectorized quadrature path.  Negative excursions follow the
    configured policy: abort with the step index, or clamp to zero and log.

    Raises:
        NumericsError: on negative components under the Error policy, or on
            non-finite values.
        ConfigError: when the supplied history cannot cover the delay horizon.
    """
    n_hist, cols = _initial_history_arrays(cfg, delays)
    S, E, I, R = cols
    events: List[Event] = []
    if min(S[n_hist], E[n_hist], I[n_hist], R[n_hist]) <= 0.0:
        events.append(Event(0, 0.0, "warning",
                            "some components start at zero; the positivity theory "
                            "assumes strictly positive initial data"))

    n_steps = int(round(cfg.t_end / cfg.dt))
    if n_steps < 1:
        raise ValidationError("t_end must allow at least one step at the given dt")

    point_mass = all(isinstance(s, PointMass) for s in delays)
    if point_mass and not _force_generic:
        gap, clamps = _run_point_mass(p, G, delays, cfg, n_hist, n_steps,
                                      S, E, I, R, events)
    else:
        gap, clamps = _run_generic(p, G, delays, cfg, n_hist, n_steps,
                                   S, E, I, R, events)

    times = np.arange(n_steps + 1) * cfg.dt
    sl = slice(n_hist, n_hist + n_steps + 1)
    return Trajectory(
        times=times,
        S=np.asarray(S[sl]), E=np.asarray(E[sl]),
        I=np.asarray(I[sl]), R=np.asarray(R[sl]),
        dt=cfg.dt, events=tuple(events),
        max_conservation_gap=gap, clamp_count=clamps,
    )


def _handle_negative(values, names, step, t, policy, events, clamp_count):
    """Apply the negativity policy; returns possibly clamped values."""
    out = list(values)
    for k, v in enumerate(values):
        if v < 0.0:
            if policy is NegativityPolicy.ERROR:
                raise NumericsError(
                    f"{names[k]} went negative ({v:.3e}) at step {step} (t={t:.6g}); "
                    "reduce dt or switch to the ClampWithWarning policy")
            out[k] = 0.0
            clamp_count += 1
            if clamp_count <= MAX_LOGGED_CLAMPS:
                events.append(Event(step, t, "clamp",
                                    f"{names[k]} clamped to zero from {v:.3e}"))
    return out, clamp_count


_NAMES = ("S", "E", "I", "R")


def _run_point_mass(p, G, delays, cfg, n_hist, n_steps, S, E, I, R, events):
    """Scalar hot loop for runs whose three delays are all point masses."""
    dt = cfg.dt
    t1, t2, t3 = (s.value for s in delays)
    B, beta, mu, mu_v, d, alpha = p.B, p.beta, p.mu, p.mu_v, p.d, p.alpha
    rem = p.removal_rate
    policy = cfg.negativity

    w1 = math.exp(-mu_v * t1)
    w12 = math.exp(-mu_v * t1 - mu * t2)
    w3 = math.exp(-mu * t3)
    o1, o2, o12, o3 = t1 / dt, t2 / dt, (t1 + t2) / dt, t3 / dt

    gap = 0.0
    clamps = 0
    n = n_hist
    for step in range(n_steps):
        s, e, i, r = S[n], E[n], I[n], R[n]

        j = n - o1
        k = int(j)
        f = j - k
        i_t1 = I[k] if f == 0.0 else I[k] + (I[k + 1] - I[k]) * f
        j = n - o2
        k = int(j)
        f = j - k
        s_t2 = S[k] if f == 0.0 else S[k] + (S[k + 1] - S[k]) * f
        j = n - o12
        k = int(j)
        f = j - k
        i_t12 = I[k] if f == 0.0 else I[k] + (I[k + 1] - I[k]) * f
        j = n - o3
        k = int(j)
        f = j - k
        i_t3 = I[k] if f == 0.0 else I[k] + (I[k + 1] - I[k]) * f

        k1 = w1 * G(i_t1)
        k2 = w12 * s_t2 * G(i_t12)
        k3 = w3 * i_t3

        dS = (B - beta * s * k1 - mu * s + alpha * k3) * dt
        dE = (beta * s * k1 - mu * e - beta * k2) * dt
        dI = (beta * k2 - rem * i) * dt
        dR = (alpha * i - mu * r - alpha * k3) * dt

        g = abs((dS + dE + dI + dR) - (B - mu * (s + e + i + r) - d * i) * dt)
        if g > gap:
            gap = g

        ns, ne, ni, nr = s + dS, e + dE, i + dI, r + dR
        if not (math.isfinite(ns) and math.isfinite(ne)
                and math.isfinite(ni) and math.isfinite(nr)):
            raise NumericsError(f"non-finite state at step {step} (t={step * dt:.6g})")
        if ns < 0.0 or ne < 0.0 or ni < 0.0 or nr < 0.0:
            (ns, ne, ni, nr), clamps = _handle_negative(
                (ns, ne, ni, nr), _NAMES, step, step * dt, policy, events, clamps)
        S.append(ns)
        E.append(ne)
        I.append(ni)
        R.append(nr)
        n += 1
    return gap, clamps


def _run_generic(p, G, delays, cfg, n_hist, n_steps, S, E, I, R, events):
    """Vectorized quadrature loop for density (or mixed) delay specs."""
    dt = cfg.dt
    t1, t2, t3 = delays
    B, beta, mu, mu_v, d, alpha = p.B, p.beta, p.mu, p.mu_v, p.d, p.alpha
    rem = p.removal_rate
    policy = cfg.negativity

    s1_nodes, w1 = t1.quadrature()
    u2_nodes, w2 = t2.quadrature()
    r3_nodes, w3 = t3.quadrature()
    f1 = w1 * np.exp(-mu_v * s1_nodes)
    f2 = w2 * np.exp(-mu * u2_nodes)
    f3 = w3 * np.exp(-mu * r3_nodes)

    total = n_hist + n_steps + 1
    Sb = np.zeros(total)
    Eb = np.zeros(total)
    Ib = np.zeros(total)
    Rb = np.zeros(total)
    Sb[:n_hist + 1] = S
    Eb[:n_hist + 1] = E
    Ib[:n_hist + 1] = I
    Rb[:n_hist + 1] = R

    off1 = s1_nodes / dt
    off2 = u2_nodes / dt
    off12 = (s1_nodes[:, None] + u2_nodes[None, :]) / dt
    off3 = r3_nodes / dt

    def gather(a, n, off):
        j = n - off
        k = np.floor(j).astype(int)
        f = j - k
        return a[k] * (1.0 - f) + a[np.minimum(k + 1, n)] * f

    gap = 0.0
    clamps = 0
    n = n_hist
    for step in range(n_steps):
        s, e, i, r = Sb[n], Eb[n], Ib[n], Rb[n]

        k1 = float(f1 @ np.asarray(G(gather(Ib, n, off1)), dtype=float))
        g12 = np.asarray(G(gather(Ib, n, off12)), dtype=float)
        k2 = float(f1 @ g12 @ (f2 * gather(Sb, n, off2)))
        k3 = float(f3 @ gather(Ib, n, off3))

        dS = (B - beta * s * k1 - mu * s + alpha * k3) * dt
        dE = (beta * s * k1 - mu * e - beta * k2) * dt
        dI = (beta * k2 - rem * i) * dt
        dR = (alpha * i - mu * r - alpha * k3) * dt

        g = abs((dS + dE + dI + dR) - (B - mu * (s + e + i + r) - d * i) * dt)
        if g > gap:
            gap = g

        vals = (s + dS, e + dE, i + dI, r + dR)
        if not all(math.isfinite(v) for v in vals):
            raise NumericsError(f"non-finite state at step {step} (t={step * dt:.6g})")
        if min(vals) < 0.0:
            vals, clamps = _handle_negative(vals, _NAMES, step, step * dt,
                                            policy, events, clamps)
        n += 1
        Sb[n], Eb[n], Ib[n], Rb[n] = vals

    S[:] = array("d", Sb)
    E[:] = array("d", Eb)
    I[:] = array("d", Ib)
    R[:] = array("d", Rb)
    return gap, clamps
