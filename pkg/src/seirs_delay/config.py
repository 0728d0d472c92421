"""Flat key-value configuration files and model assembly.

The format is one ``name = value`` per line, ``#`` comments, dotted section
prefixes (``T1.value``, ``incidence.a1``, ``sim.dt``), later keys overriding
earlier ones.  It is trivially parseable and diff-friendly; floats are
written in their shortest round-tripping form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

from .model_core import (
    ConfigError,
    DelaySpec,
    Density,
    DimensionlessParams,
    INCIDENCE_FAMILIES,
    IncidenceModel,
    PointMass,
    State,
)
from .simulator import NegativityPolicy


def parse_kv(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse flat key-value lines into a dict; later keys override earlier."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'name = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def format_kv(mapping: Mapping[str, object]) -> str:
    """Render a mapping as key = value lines (floats round-trip exactly)."""
    lines = []
    for key, value in mapping.items():
        if isinstance(value, float):
            lines.append(f"{key} = {value!r}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _require(kv: Mapping[str, str], key: str) -> str:
    if key not in kv:
        raise ConfigError(f"missing required key '{key}'")
    return kv[key]


def _as_float(kv: Mapping[str, str], key: str,
              default: Optional[float] = None) -> Optional[float]:
    if key not in kv:
        return default
    try:
        return float(kv[key])
    except ValueError:
        raise ConfigError(f"key '{key}' must be a number, got {kv[key]!r}") from None


def _require_float(kv: Mapping[str, str], key: str) -> float:
    _require(kv, key)
    value = _as_float(kv, key)
    assert value is not None
    return value


def _as_int(kv: Mapping[str, str], key: str, default: int) -> int:
    if key not in kv:
        return default
    try:
        return int(kv[key])
    except ValueError:
        raise ConfigError(f"key '{key}' must be an integer, got {kv[key]!r}") from None


def params_from_kv(kv: Mapping[str, str]) -> DimensionlessParams:
    return DimensionlessParams(
        B=_require_float(kv, "B"),
        beta=_require_float(kv, "beta"),
        mu=_require_float(kv, "mu"),
        mu_v=_require_float(kv, "mu_v"),
        d=_require_float(kv, "d"),
        alpha=_require_float(kv, "alpha"),
    )


def _density_from_kv(kv: Mapping[str, str], prefix: str) -> Density:
    name = _require(kv, f"{prefix}.density")
    lo = _as_float(kv, f"{prefix}.lo", 0.0)
    hi = _as_float(kv, f"{prefix}.hi", None)
    nodes = _as_int(kv, f"{prefix}.nodes", 257)
    if name == "uniform":
        if hi is None:
            raise ConfigError(f"uniform density '{prefix}' needs '{prefix}.hi'")
        width = hi - lo
        return Density(lambda x: 1.0 / width, lo, hi, nodes)
    if name == "exponential":
        rate = _require_float(kv, f"{prefix}.rate")
        if rate <= 0:
            raise ConfigError(f"'{prefix}.rate' must be positive")
        return Density(lambda x: rate * math.exp(-rate * (x - lo)) if x >= lo else 0.0,
                       lo, hi, nodes)
    raise ConfigError(f"unknown density '{name}' for '{prefix}' "
                      "(supported: uniform, exponential)")


def delay_from_kv(kv: Mapping[str, str], prefix: str) -> DelaySpec:
    kind = kv.get(f"{prefix}.kind")
    if kind is None:
        kind = "point" if f"{prefix}.value" in kv else None
    if kind == "point":
        return PointMass(_require_float(kv, f"{prefix}.value"))
    if kind == "density":
        return _density_from_kv(kv, prefix)
    raise ConfigError(f"missing required key '{prefix}.kind' (point or density)")


def delays_from_kv(kv: Mapping[str, str]) -> Tuple[DelaySpec, DelaySpec, DelaySpec]:
    return tuple(delay_from_kv(kv, name) for name in ("T1", "T2", "T3"))


def incidence_from_kv(kv: Mapping[str, str]) -> IncidenceModel:
    family = _require(kv, "incidence.family")
    if family not in INCIDENCE_FAMILIES:
        raise ConfigError(f"unknown incidence family '{family}' "
                          f"(supported: {', '.join(sorted(INCIDENCE_FAMILIES))})")
    factory = INCIDENCE_FAMILIES[family]
    if family == "holling2":
        return factory(_as_float(kv, "incidence.a1", 0.05))
    if family in ("saturating", "quadratic_saturating"):
        return factory(_require_float(kv, "incidence.theta"))
    return factory()


def history_from_kv(kv: Mapping[str, str]) -> State:
    return State(
        S=_require_float(kv, "history.S"),
        E=_require_float(kv, "history.E"),
        I=_require_float(kv, "history.I"),
        R=_require_float(kv, "history.R"),
    )


@dataclass(frozen=True)
class ModelSetup:
    """Everything a run needs, assembled from one key-value mapping."""

    params: DimensionlessParams
    delays: Tuple[DelaySpec, DelaySpec, DelaySpec]
    incidence: IncidenceModel
    history: Optional[State]
    dt: float
    t_end: float
    stride: int
    negativity: NegativityPolicy
    q: Optional[float]
    rho: Optional[float]
    epsilon_extinct: float


def model_from_kv(kv: Mapping[str, str], need_history: bool = False) -> ModelSetup:
    """Assemble the model ingredients from a parsed configuration.

    History keys are only demanded when need_history is set (simulation
    modes); analysis runs without them.
    """
    history = None
    if need_history or "history.S" in kv:
        history = history_from_kv(kv)

    negativity_raw = kv.get("sim.negativity", NegativityPolicy.ERROR.value)
    try:
        negativity = NegativityPolicy(negativity_raw)
    except ValueError:
        raise ConfigError(
            f"sim.negativity must be one of "
            f"{[p.value for p in NegativityPolicy]}, got {negativity_raw!r}") from None

    stride = _as_int(kv, "sim.stride", 1)
    if stride < 1:
        raise ConfigError(f"sim.stride must be at least 1, got {stride}")

    return ModelSetup(
        params=params_from_kv(kv),
        delays=delays_from_kv(kv),
        incidence=incidence_from_kv(kv),
        history=history,
        dt=_as_float(kv, "sim.dt", 1e-3),
        t_end=_as_float(kv, "sim.t_end", 1000.0),
        stride=stride,
        negativity=negativity,
        q=_as_float(kv, "permanence.q", None),
        rho=_as_float(kv, "permanence.rho", None),
        epsilon_extinct=_as_float(kv, "diagnostics.epsilon_extinct", 1e-3),
    )


def setup_to_kv(setup: ModelSetup) -> Dict[str, object]:
    """Serialize a model setup back to the flat key-value form."""
    p = setup.params
    out: Dict[str, object] = {
        "B": p.B, "beta": p.beta, "mu": p.mu, "mu_v": p.mu_v,
        "d": p.d, "alpha": p.alpha,
    }
    for name, spec in zip(("T1", "T2", "T3"), setup.delays):
        if isinstance(spec, PointMass):
            out[f"{name}.kind"] = "point"
            out[f"{name}.value"] = spec.value
        else:
            out[f"{name}.kind"] = "density"
            out[f"{name}.lo"] = spec.lo
            out[f"{name}.hi"] = spec.hi
            out[f"{name}.nodes"] = spec.nodes
    out["incidence.family"] = setup.incidence.family
    for key, value in zip(("a1",) if setup.incidence.family == "holling2" else ("theta",),
                          setup.incidence.params):
        out[f"incidence.{key}"] = value
    if setup.history is not None:
        for comp in "SEIR":
            out[f"history.{comp}"] = getattr(setup.history, comp)
    out["sim.dt"] = setup.dt
    out["sim.t_end"] = setup.t_end
    out["sim.stride"] = setup.stride
    out["sim.negativity"] = setup.negativity.value
    return out
