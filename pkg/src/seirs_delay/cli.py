"""Command-line front end: analyze, simulate, validate, and sweep.

Reads flat key-value configuration files (see config.py for the grammar),
applies ``--set`` overrides, and writes deterministic text outputs:
``report.txt``/``report.kv`` for the closed-form analysis, ``trajectory.csv``
and ``checks.kv`` for simulation runs, ``sweep.csv`` for parameter sweeps.
Theorem-check failures are reported in the outputs but are not process
errors; every hard error path exits nonzero.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import AnalysisReport, analyze, permanence_bounds
from .config import ModelSetup, format_kv, model_from_kv, parse_kv
from .diagnostics import TheoremCheckReport, classify_outcome, standard_checks
from .model_core import ConfigError, NumericsError, ValidationError, validate_incidence
from .simulator import SimulationConfig, Trajectory, simulate


# ============================================================================
# Report rendering
# ============================================================================

def analysis_to_kv(report: AnalysisReport) -> Dict[str, object]:
    out: Dict[str, object] = {
        "dfe.S": report.dfe.S, "dfe.E": report.dfe.E,
        "dfe.I": report.dfe.I, "dfe.R": report.dfe.R,
        "r0_star": report.r0_star,
        "r0_star_inverse": 1.0 / report.r0_star,
        "r0_random": report.r0_random,
        "espr": report.espr,
        "regime": report.regime.value,
        "endemic_condition_met": str(report.endemic_condition_met).lower(),
    }
    if report.lam is not None:
        out["lambda"] = report.lam
    if report.endemic is not None:
        eq = report.endemic
        out.update({"endemic.S": eq.S, "endemic.E": eq.E,
                    "endemic.I": eq.I, "endemic.R": eq.R})
    if report.permanence is not None:
        b = report.permanence
        out.update({"permanence.v1": b.v1, "permanence.v2": b.v2,
                    "permanence.q_bar": b.q_bar, "permanence.q": b.q,
                    "permanence.rho": b.rho, "permanence.s_triangle": b.s_triangle,
                    "permanence.h": b.h})
    return out


def analysis_to_text(report: AnalysisReport) -> str:
    lines = [
        "Threshold analysis",
        "==================",
        f"disease-free equilibrium: S={report.dfe.S!r}, E=0, I=0, R=0",
        f"reproduction number (fixed delays): r0_star = {report.r0_star!r}",
        f"  1/r0_star = {1.0 / report.r0_star!r}",
        f"reproduction value (random delays): r0_random = {report.r0_random!r}",
        f"expected parasite survival: espr = {report.espr!r}",
        f"regime: {report.regime.value}",
    ]
    if report.lam is not None:
        lines.append(f"extinction rate: lambda = {report.lam!r}")
    else:
        lines.append("extinction rate: not applicable (no extinction guarantee)")
    if report.endemic is not None:
        eq = report.endemic
        lines.append("endemic equilibrium:")
        lines.append(f"  S1* = {eq.S!r}")
        lines.append(f"  E1* = {eq.E!r}")
        lines.append(f"  I1* = {eq.I!r}")
        lines.append(f"  R1* = {eq.R!r}")
    else:
        lines.append("endemic equilibrium: absent")
    lines.append(f"sufficient existence condition met: {report.endemic_condition_met}")
    if report.permanence is not None:
        b = report.permanence
        lines.append("permanence floors:")
        lines.append(f"  v1 = {b.v1!r} (susceptible)")
        lines.append(f"  v2 = {b.v2!r} (infectious; q={b.q!r}, rho={b.rho!r}, h={b.h!r})")
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


# ============================================================================
# Modes
# ============================================================================

def run_analyze(setup: ModelSetup, out_dir: Path) -> AnalysisReport:
    """Closed-form analysis; writes report.txt and report.kv."""
    report = analyze(setup.params, setup.incidence, setup.delays,
                     q=setup.q, rho=setup.rho)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir / "report.txt", analysis_to_text(report))
    _write(out_dir / "report.kv", format_kv(analysis_to_kv(report)))
    return report


def run_simulate(setup: ModelSetup, out_dir: Path
                 ) -> Tuple[Trajectory, TheoremCheckReport]:
    """Forward run plus default diagnostics; writes trajectory and checks."""
    if setup.history is None:
        raise ConfigError("missing required key 'history.S' (simulation needs "
                          "initial fractions history.S/E/I/R)")
    report = run_analyze(setup, out_dir)
    cfg = SimulationConfig(history=setup.history, dt=setup.dt,
                           t_end=setup.t_end, negativity=setup.negativity)
    traj = simulate(setup.params, setup.incidence, setup.delays, cfg)
    checks = standard_checks(traj, setup.params, report,
                             epsilon_extinct=setup.epsilon_extinct)
    outcome = classify_outcome(traj, setup.epsilon_extinct,
                               floor=(report.permanence.v2
                                      if report.permanence is not None else None))

    out_dir.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out_dir / "trajectory.csv", stride=setup.stride)
    kv: Dict[str, object] = {"outcome": outcome.value}
    kv["final.t"] = traj.t_end
    for comp in ("S", "E", "I", "R", "N"):
        kv[f"final.{comp}"] = float(traj.component(comp)[-1])
    kv["max_conservation_gap"] = traj.max_conservation_gap
    kv["clamp_count"] = traj.clamp_count
    _write(out_dir / "checks.kv", format_kv(kv) + checks.render_kv() + "\n")
    if traj.events:
        _write(out_dir / "events.log", traj.events_text() + "\n")
    return traj, checks


SWEEP_COLUMNS = ("value", "r0_star", "r0_random", "espr", "regime",
                 "lambda", "I1_star", "S1_star", "error")


def run_sweep(kv: Dict[str, str], axis_key: str, values: Sequence[float],
              out_dir: Path) -> List[Dict[str, str]]:
    """Re-run the analysis across one numeric axis; writes sweep.csv.

    Each point is assembled and analyzed in isolation; per-point failures
    land in the row's error column and the sweep continues.
    """
    if axis_key not in kv:
        raise ConfigError(f"sweep axis '{axis_key}' is not a configured parameter")
    rows: List[Dict[str, str]] = []
    for value in values:
        point_kv = dict(kv)
        point_kv[axis_key] = repr(float(value))
        row = {c: "" for c in SWEEP_COLUMNS}
        row["value"] = repr(float(value))
        try:
            setup = model_from_kv(point_kv)
            report = analyze(setup.params, setup.incidence, setup.delays,
                             q=setup.q, rho=setup.rho)
            row["r0_star"] = repr(report.r0_star)
            row["r0_random"] = repr(report.r0_random)
            row["espr"] = repr(report.espr)
            row["regime"] = report.regime.value
            row["lambda"] = repr(report.lam) if report.lam is not None else ""
            if report.endemic is not None:
                row["I1_star"] = repr(report.endemic.I)
                row["S1_star"] = repr(report.endemic.S)
        except (ConfigError, ValidationError, NumericsError) as exc:
            row["error"] = str(exc).replace("\n", " ").replace(",", ";")
        rows.append(row)

    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [",".join(SWEEP_COLUMNS)]
    lines += [",".join(row[c] for c in SWEEP_COLUMNS) for row in rows]
    _write(out_dir / "sweep.csv", "\n".join(lines) + "\n")
    return rows


def run_validate(setup: ModelSetup) -> Tuple[str, bool]:
    """Incidence axiom check; returns the rendered report."""
    report = validate_incidence(setup.incidence)
    lines = [f"incidence family: {setup.incidence.family} "
             f"params={setup.incidence.params}"]
    for r in report.results:
        lines.append(f"  {r.name}: {r.status}  ({r.detail})")
    lines.append(f"overall: {'pass' if report.all_pass else 'check statuses above'}")
    return "\n".join(lines), report.all_pass


# ============================================================================
# Argument handling
# ============================================================================

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seirs-delay",
        description="Delayed SEIRS epidemic model: analysis, simulation, sweeps.")
    sub = parser.add_subparsers(dest="mode", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, default=None,
                        help="flat key=value configuration file")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
        sp.add_argument("--out", type=Path, default=Path("."),
                        help="output directory")

    sp = sub.add_parser("analyze", help="thresholds, equilibria, extinction rate")
    common(sp)

    sp = sub.add_parser("simulate", help="forward run plus theorem diagnostics")
    common(sp)
    sp.add_argument("--dt", type=float, default=None, help="step size")
    sp.add_argument("--t-end", type=float, default=None, help="horizon")
    sp.add_argument("--stride", type=int, default=None, help="CSV output stride")

    sp = sub.add_parser("validate", help="check the incidence axioms")
    common(sp)

    sp = sub.add_parser("sweep", help="analysis across one parameter axis")
    common(sp)
    sp.add_argument("--sweep", required=True, metavar="KEY:LO:HI:N",
                    help="axis key and linear range")
    return parser


def _merged_kv(args) -> Dict[str, str]:
    kv: Dict[str, str] = {}
    if args.config is not None:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        kv.update(parse_kv(text, source=str(args.config)))
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        kv[key.strip()] = value.strip()
    if getattr(args, "dt", None) is not None:
        kv["sim.dt"] = repr(args.dt)
    if getattr(args, "t_end", None) is not None:
        kv["sim.t_end"] = repr(args.t_end)
    if getattr(args, "stride", None) is not None:
        kv["sim.stride"] = str(args.stride)
    return kv


def _parse_sweep_axis(spec: str) -> Tuple[str, np.ndarray]:
    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigError(f"--sweep expects KEY:LO:HI:N, got {spec!r}")
    key, lo_s, hi_s, n_s = parts
    try:
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
    except ValueError:
        raise ConfigError(f"--sweep expects numeric LO:HI:N, got {spec!r}") from None
    if n < 1:
        raise ConfigError(f"--sweep needs at least one point, got {n}")
    values = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
    return key, values


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        kv = _merged_kv(args)
        if args.mode == "analyze":
            report = run_analyze(model_from_kv(kv), args.out)
            sys.stdout.write(analysis_to_text(report))
        elif args.mode == "simulate":
            traj, checks = run_simulate(model_from_kv(kv, need_history=True), args.out)
            sys.stdout.write(checks.render_text() + "\n")
            if traj.events:
                sys.stdout.write(f"{len(traj.events)} event(s) logged\n")
        elif args.mode == "validate":
            text, _ = run_validate(model_from_kv(kv))
            sys.stdout.write(text + "\n")
        elif args.mode == "sweep":
            axis_key, values = _parse_sweep_axis(args.sweep)
            rows = run_sweep(kv, axis_key, values, args.out)
            failures = sum(1 for r in rows if r["error"])
            sys.stdout.write(f"swept {axis_key} over {len(rows)} point(s); "
                             f"{failures} failure(s)\n")
    except (ConfigError, ValidationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NumericsError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
