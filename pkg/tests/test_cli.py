"""Command-line front end: modes, outputs, determinism, and error paths."""

import math

import pytest

from seirs_delay.cli import main

from conftest import BASE, BETA_HIGH, BETA_LOW, T1, T2, T3

BASE_CONFIG = f"""\
# dimensionless rates
B = {BASE['B']!r}
beta = {BETA_LOW!r}
mu = {BASE['mu']!r}
mu_v = {BASE['mu_v']!r}
d = {BASE['d']!r}
alpha = {BASE['alpha']!r}

# incubation and immunity delays
T1.kind = point
T1.value = {T1!r}
T2.kind = point
T2.value = {T2!r}
T3.kind = point
T3.value = {T3!r}

incidence.family = holling2
incidence.a1 = 0.05

history.S = {10 / 23!r}
history.E = {5 / 23!r}
history.I = {6 / 23!r}
history.R = {2 / 23!r}
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text(BASE_CONFIG)
    return path


def read_kv(path):
    out = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if line and "=" in line:
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


# ============================================================================
# analyze
# ============================================================================

class TestAnalyze:
    def test_subcritical_report_values(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["analyze", "--config", str(config_file),
                     "--out", str(out)]) == 0
        kv = read_kv(out / "report.kv")
        assert float(kv["r0_star"]) == pytest.approx(0.2498732, rel=1e-6)
        assert float(kv["lambda"]) == pytest.approx(0.06443506, rel=1e-6)
        assert kv["regime"] == "ExtinctionByR0"
        assert "endemic.I" not in kv
        text = (out / "report.txt").read_text()
        assert "ExtinctionByR0" in text
        assert "regime" in capsys.readouterr().out

    def test_supercritical_report_values(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["analyze", "--config", str(config_file),
                     "--set", f"beta={BETA_HIGH!r}", "--out", str(out)]) == 0
        kv = read_kv(out / "report.kv")
        assert float(kv["r0_star"]) == pytest.approx(92.45307, rel=1e-5)
        assert float(kv["espr"]) == pytest.approx(0.01110898, rel=1e-6)
        assert float(kv["r0_star_inverse"]) == pytest.approx(0.0108163, rel=1e-5)
        assert kv["regime"] == "EndemicCandidate"
        assert "lambda" not in kv

    def test_missing_required_key_names_it(self, tmp_path, capsys):
        path = tmp_path / "broken.cfg"
        path.write_text("\n".join(l for l in BASE_CONFIG.splitlines()
                                  if not l.startswith("beta")))
        code = main(["analyze", "--config", str(path), "--out", str(tmp_path)])
        assert code != 0
        assert "beta" in capsys.readouterr().err

    def test_malformed_line_reports_line_number(self, tmp_path, capsys):
        path = tmp_path / "broken.cfg"
        path.write_text("B = 1e-5\nthis is not a setting\n")
        assert main(["analyze", "--config", str(path), "--out", str(tmp_path)]) != 0
        assert ":2" in capsys.readouterr().err


# ============================================================================
# simulate
# ============================================================================

class TestSimulate:
    def test_small_run_outputs(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(config_file), "--out", str(out),
                     "--dt", "0.01", "--t-end", "2.0"]) == 0
        lines = (out / "trajectory.csv").read_text().strip().splitlines()
        assert lines[0] == "t,S,E,I,R,N"
        assert len(lines) == 202
        kv = read_kv(out / "checks.kv")
        assert "outcome" in kv
        assert kv["clamp_count"] == "0"
        assert float(kv["max_conservation_gap"]) < 1e-12
        assert "check.feasible_region.passed" in kv

    def test_stride_thins_output(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(config_file), "--out", str(out),
                     "--dt", "0.01", "--t-end", "2.0", "--stride", "10"]) == 0
        lines = (out / "trajectory.csv").read_text().strip().splitlines()
        assert len(lines) == 22  # header + samples 0,10,...,200

    def test_outputs_are_deterministic(self, config_file, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["simulate", "--config", str(config_file),
                         "--out", str(out), "--dt", "0.01", "--t-end", "2.0"]) == 0
        for name in ("trajectory.csv", "checks.kv", "report.kv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_zero_horizon_is_rejected(self, config_file, tmp_path, capsys):
        code = main(["simulate", "--config", str(config_file),
                     "--out", str(tmp_path), "--t-end", "0"])
        assert code != 0
        assert "t_end" in capsys.readouterr().err

    def test_missing_history_is_rejected(self, tmp_path, capsys):
        path = tmp_path / "nohist.cfg"
        path.write_text("\n".join(l for l in BASE_CONFIG.splitlines()
                                  if not l.startswith("history")))
        code = main(["simulate", "--config", str(path), "--out", str(tmp_path)])
        assert code != 0
        assert "history.S" in capsys.readouterr().err


# ============================================================================
# validate
# ============================================================================

class TestValidate:
    def test_axiom_report_printed(self, config_file, capsys):
        assert main(["validate", "--config", str(config_file)]) == 0
        out = capsys.readouterr().out
        for axiom in ("A1", "A2", "A3", "A4", "A5", "A6"):
            assert axiom in out
        assert "holling2" in out

    def test_linear_family_shows_boundary(self, capsys):
        assert main(["validate", "--set", "incidence.family=linear",
                     "--set", "B=1e-5", "--set", "beta=1", "--set", "mu=1e-5",
                     "--set", "mu_v=40", "--set", "d=1e-4", "--set", "alpha=0.08",
                     "--set", "T1.value=0.1", "--set", "T2.value=0.2",
                     "--set", "T3.value=2.0"]) == 0
        assert "boundary" in capsys.readouterr().out


# ============================================================================
# sweep
# ============================================================================

class TestSweep:
    def test_beta_sweep_crosses_the_reproduction_threshold(self, config_file,
                                                           tmp_path):
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(config_file),
                     "--sweep", "beta:0.01:10:20", "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
        assert len(rows) == 20
        removal = BASE["mu"] + BASE["d"] + BASE["alpha"]
        regimes = [r["regime"] for r in rows]
        flip = next(i for i, reg in enumerate(regimes) if reg != "ExtinctionByR0")
        assert float(rows[flip - 1]["value"]) < removal < float(rows[flip]["value"])
        assert regimes[-1] == "EndemicCandidate"

    def test_single_point_sweep_matches_analyze(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["analyze", "--config", str(config_file),
                     "--set", f"beta={BETA_HIGH!r}", "--out", str(out)]) == 0
        report = read_kv(out / "report.kv")
        assert main(["sweep", "--config", str(config_file),
                     "--sweep", f"beta:{BETA_HIGH}:{BETA_HIGH}:1",
                     "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        row = dict(zip(lines[0].split(","), lines[1].split(",")))
        assert row["r0_star"] == report["r0_star"]
        assert row["espr"] == report["espr"]
        assert row["regime"] == report["regime"]
        assert row["lambda"] == ""
        assert row["I1_star"] == ""

    def test_vector_delay_sweep_brackets_the_survival_threshold(self, config_file,
                                                                tmp_path):
        # Holding T2 fixed, the regime flips to extinction-by-survival once
        # exp(-mu_v*T1 - mu*T2) drops below 1/r0_star, i.e. above
        # T1* = (log(r0_star) - mu*T2)/mu_v.
        removal = BASE["mu"] + BASE["d"] + BASE["alpha"]
        r0 = BETA_HIGH / removal
        t1_star = (math.log(r0) - BASE["mu"] * T2) / BASE["mu_v"]
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(config_file),
                     "--set", f"beta={BETA_HIGH!r}",
                     "--sweep", "T1.value:0.08:0.13:26", "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
        flip = next(i for i, r in enumerate(rows)
                    if r["regime"] == "ExtinctionBySurvival")
        assert rows[flip - 1]["regime"] == "EndemicCandidate"
        assert float(rows[flip - 1]["value"]) < t1_star < float(rows[flip]["value"])
        assert 0.105 < t1_star < 0.107

    def test_per_point_failures_recorded_in_row(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(config_file),
                     "--sweep", "beta:-1:1:3", "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
        assert rows[0]["error"] != "" and "beta" in rows[0]["error"]
        assert rows[1]["error"] == ""  # beta = 0 is a valid limit
        assert rows[2]["error"] == ""

    def test_unknown_axis_is_rejected(self, config_file, tmp_path, capsys):
        code = main(["sweep", "--config", str(config_file),
                     "--sweep", "bogus:0:1:3", "--out", str(tmp_path)])
        assert code != 0
        assert "bogus" in capsys.readouterr().err

    def test_malformed_axis_spec_is_rejected(self, config_file, tmp_path, capsys):
        code = main(["sweep", "--config", str(config_file),
                     "--sweep", "beta:0:1", "--out", str(tmp_path)])
        assert code != 0
        assert "LO:HI:N" in capsys.readouterr().err
