"""Thresholds, equilibrium root-finding, extinction rates, permanence floors."""

import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seirs_delay import (
    Density,
    EndemicEquilibrium,
    PointMass,
    Regime,
    ValidationError,
    analyze,
    brn_constant_delays,
    brn_random_delays,
    endemic_equilibrium,
    endemic_existence_condition,
    equilibrium_function,
    equilibrium_residuals,
    espr,
    extinction_check,
    exp_moment,
    holling2,
    linear,
    permanence_bounds,
    quadratic_saturating,
    saturating,
    susceptible_floor,
)

from conftest import (
    BASE,
    BETA_HIGH,
    BETA_LOW,
    REF_EQ_I,
    REF_EQ_S,
    REF_ESPR,
    REF_LAMBDA,
    REF_R0_HIGH,
    REF_R0_LOW,
    REF_V1,
    T1,
    T2,
    T3,
    make_params,
    point_delays,
)


def reference_equilibrium():
    """The persistence scenario's reference steady state, taken as given."""
    return EndemicEquilibrium(S=REF_EQ_S, E=0.0006840553, I=REF_EQ_I, R=8.3052e-03)


# ============================================================================
# Reproduction numbers
# ============================================================================

class TestReproductionNumbers:
    def test_subcritical_value(self, params_low):
        assert brn_constant_delays(params_low) == pytest.approx(REF_R0_LOW, rel=1e-6)

    def test_supercritical_value(self, params_high):
        assert brn_constant_delays(params_high) == pytest.approx(REF_R0_HIGH, rel=1e-5)

    def test_threshold_boundary_is_exactly_one(self):
        removal = BASE["mu"] + BASE["d"] + BASE["alpha"]
        assert brn_constant_delays(make_params(removal)) == 1.0

    @given(beta=st.floats(1e-6, 1e3), k=st.integers(-20, 20))
    @settings(max_examples=100, deadline=None)
    def test_homogeneous_in_beta(self, beta, k):
        # Power-of-two scalings are exact in binary floating point, which is
        # what makes an equality (not approx) assertion legitimate here.
        c = 2.0 ** k
        p1, p2 = make_params(beta), make_params(c * beta)
        assert brn_constant_delays(p2) == c * brn_constant_delays(p1)

    def test_random_delay_value_against_high_precision_oracle(self, params_low):
        getcontext().prec = 40
        mu, d, alpha = (Decimal(repr(BASE[k])) for k in ("mu", "d", "alpha"))
        beta = Decimal(repr(BETA_LOW))
        expected = float((beta + alpha) / (mu + d + alpha))
        value = brn_random_delays(params_low)
        assert value == pytest.approx(expected, rel=1e-12)
        assert value == pytest.approx(1.24772, abs=2e-4)

    def test_zero_recovery_collapses_to_constant_delay_value(self):
        p = make_params(0.5, alpha=0.0)
        assert brn_random_delays(p) == brn_constant_delays(p)

    def test_no_transmission_no_recovery_gives_zero(self):
        assert brn_random_delays(make_params(0.0, alpha=0.0)) == 0.0


# ============================================================================
# Expected survival probability
# ============================================================================

class TestEspr:
    def test_point_mass_reference_value(self, params_low, delays):
        assert espr(params_low, delays[0], delays[1]) == \
            pytest.approx(REF_ESPR, rel=1e-6)

    def test_point_mass_is_closed_form(self, params_low, delays):
        exact = math.exp(-BASE["mu_v"] * T1) * math.exp(-BASE["mu"] * T2)
        assert espr(params_low, delays[0], delays[1]) == pytest.approx(exact, rel=1e-15)

    def test_zero_delays_give_unity(self, params_low):
        assert espr(params_low, PointMass(0.0), PointMass(0.0)) == 1.0

    def test_uniform_delay_against_stratified_monte_carlo(self, params_low):
        # Stratified (Latin) sampling: one uniform draw per 1/n stratum, so
        # the estimator error is far below the comparison tolerance.
        rng = np.random.default_rng(20240711)
        n = 1_000_000
        u = (np.arange(n) + rng.random(n)) / n
        mc = float(np.exp(-BASE["mu_v"] * (0.21 * u)).mean()) \
            * math.exp(-BASE["mu"] * T2)
        # The integrand decays by e^(-9) across the support; 1025 trapezoid
        # nodes keep the quadrature error an order below the tolerance.
        spec = Density(lambda x: 1.0 / 0.21, 0.0, 0.21, nodes=1025)
        assert espr(params_low, spec, PointMass(T2)) == pytest.approx(mc, abs=1e-5)


# ============================================================================
# Endemic equilibrium
# ============================================================================

class TestEndemicEquilibrium:
    def test_subcritical_has_no_equilibrium(self, params_low, incidence, delays):
        assert endemic_equilibrium(params_low, incidence, delays) is None

    def test_supercritical_scenario_has_no_feasible_root(self, params_high,
                                                         incidence, delays):
        # With this incidence slope the origin value of the equilibrium
        # function is already negative (the sufficient existence condition
        # would need a survival probability above 1), so no positive root
        # exists and the solver must report absence rather than a root.
        surv = espr(params_high, delays[0], delays[1])
        h0 = params_high.B * (1.0 - params_high.removal_rate
                              / (params_high.beta * incidence.dG0 * surv))
        assert h0 < 0
        assert not endemic_existence_condition(params_high, incidence, surv)
        assert endemic_equilibrium(params_high, incidence, delays) is None

    def test_root_exists_iff_origin_value_positive(self, delays):
        cases = [
            (make_params(200.0), holling2(0.05)),
            (make_params(BETA_HIGH), holling2(0.05)),
            (make_params(BETA_HIGH), saturating(0.05)),
            (make_params(BETA_LOW), holling2(0.05)),
        ]
        for p, G in cases:
            surv = espr(p, delays[0], delays[1])
            h0 = p.B * (1.0 - p.removal_rate / (p.beta * G.dG0 * surv))
            eq = endemic_equilibrium(p, G, delays)
            assert (eq is not None) == (h0 > 0)

    def test_root_satisfies_equilibrium_system(self, delays):
        # Residual oracle: substitute the returned state back into the
        # steady-state susceptible and infectious balance equations.
        p, G = make_params(200.0), holling2(0.05)
        eq = endemic_equilibrium(p, G, delays)
        assert eq is not None
        H = equilibrium_function(p, G, delays)
        assert abs(H(eq.I)) < 1e-12 * p.B

        e1 = math.exp(-BASE["mu_v"] * T1)
        e2 = math.exp(-BASE["mu"] * T2)
        e3 = math.exp(-BASE["mu"] * T3)
        g = float(G(eq.I))
        res_s = p.B - p.beta * e1 * eq.S * g - p.mu * eq.S + p.alpha * e3 * eq.I
        res_i = p.beta * e1 * e2 * eq.S * g - p.removal_rate * eq.I
        assert abs(res_s) < 1e-10
        assert abs(res_i) < 1e-10
        lib_s, lib_i = equilibrium_residuals(p, G, delays, eq)
        assert abs(lib_s) < 1e-10 and abs(lib_i) < 1e-10

    def test_root_matches_closed_form_for_saturating_incidence(self, params_high,
                                                               delays):
        # For G(x) = x/(1+theta*x) the equilibrium function is affine in I,
        # so the root has a closed form the solver must reproduce.
        theta = 0.05
        G = saturating(theta)
        p = params_high
        e1 = exp_moment(delays[0], p.mu_v)
        e2 = exp_moment(delays[1], p.mu)
        e3 = exp_moment(delays[2], p.mu)
        surv = e1 * e2
        c1 = p.removal_rate * p.mu / p.beta
        c2 = (p.mu + p.d) * e1 + p.alpha * e1 * (1.0 - e2 * e3)
        i_exact = (p.B * surv - c1) / (c1 * theta + c2)
        assert i_exact > 0

        eq = endemic_equilibrium(p, G, delays)
        assert eq is not None
        assert eq.I == pytest.approx(i_exact, rel=1e-10)
        s_exact = p.removal_rate * (1.0 + theta * i_exact) / (p.beta * surv)
        assert eq.S == pytest.approx(s_exact, rel=1e-10)
        e_exact = p.removal_rate * i_exact * (1.0 / e2 - 1.0) / p.mu
        r_exact = p.alpha * i_exact * (1.0 - e3) / p.mu
        assert eq.E == pytest.approx(e_exact, rel=1e-10)
        assert eq.R == pytest.approx(r_exact, rel=1e-10)

    @pytest.mark.parametrize("G", [
        holling2(0.05), saturating(0.5), quadratic_saturating(0.005), linear()])
    def test_equilibrium_function_strictly_decreasing(self, G, params_high, delays):
        H = equilibrium_function(params_high, G, delays)
        grid = np.linspace(1e-6, params_high.s0, 1000)
        values = np.array([H(float(i)) for i in grid])
        assert np.all(np.diff(values) < 0)

    def test_no_transmission_means_no_equilibrium(self, delays, incidence):
        p = make_params(0.0)
        assert endemic_equilibrium(p, incidence, delays) is None


# ============================================================================
# Extinction classification
# ============================================================================

class TestExtinctionCheck:
    def test_subcritical_rate(self, params_low, delays):
        surv = espr(params_low, delays[0], delays[1])
        regime, lam = extinction_check(params_low, surv)
        assert regime is Regime.EXTINCTION_BY_R0
        assert lam == pytest.approx(REF_LAMBDA, rel=1e-6)

    def test_threshold_boundary_uses_survival_branch(self, delays):
        removal = BASE["mu"] + BASE["d"] + BASE["alpha"]
        p = make_params(removal)
        surv = espr(p, delays[0], delays[1])
        regime, lam = extinction_check(p, surv)
        assert regime is Regime.EXTINCTION_BY_SURVIVAL
        assert lam == pytest.approx(p.beta * p.s0 * (1.0 - surv), rel=1e-12)

    def test_supercritical_scenario_is_endemic_candidate(self, params_high, delays):
        surv = espr(params_high, delays[0], delays[1])
        regime, lam = extinction_check(params_high, surv)
        assert regime is Regime.ENDEMIC_CANDIDATE
        assert lam is None
        assert surv > 1.0 / brn_constant_delays(params_high)

    def test_rate_vanishes_at_the_threshold(self):
        removal = BASE["mu"] + BASE["d"] + BASE["alpha"]
        p = make_params(removal * (1.0 - 1e-10))
        _, lam = extinction_check(p, 0.5)
        assert 0.0 < lam < 1e-9

    def test_rejects_survival_outside_unit_interval(self, params_low):
        with pytest.raises(ValidationError, match="espr"):
            extinction_check(params_low, 0.0)
        with pytest.raises(ValidationError, match="espr"):
            extinction_check(params_low, 1.5)

    @given(beta=st.floats(1e-8, 1e3), surv=st.floats(1e-12, 1.0, exclude_min=True))
    @settings(max_examples=200, deadline=None)
    def test_rate_positive_whenever_returned(self, beta, surv):
        p = make_params(beta)
        _, lam = extinction_check(p, surv)
        if lam is not None:
            assert lam > 0.0


# ============================================================================
# Permanence bounds
# ============================================================================

class TestPermanenceBounds:
    def test_susceptible_floor_reference_value(self, params_high, incidence, delays):
        bounds = permanence_bounds(params_high, incidence,
                                   reference_equilibrium(), delays)
        assert bounds.v1 == pytest.approx(REF_V1, rel=1e-6)

    def test_default_fraction_and_waiting_constant(self, params_high, incidence,
                                                   delays):
        bounds = permanence_bounds(params_high, incidence,
                                   reference_equilibrium(), delays)
        assert bounds.q == pytest.approx(bounds.q_bar / 2.0, rel=1e-15)
        assert bounds.q_bar == pytest.approx(8.030374579777428e-05, rel=1e-9)
        assert bounds.rho == 4.0
        assert bounds.h == pytest.approx(T1 + T2, rel=1e-12)
        assert bounds.v2 == pytest.approx(1.6201064440821146e-06, rel=1e-9)
        assert 0.0 < bounds.q < bounds.q_bar < 1.0
        assert bounds.s_triangle > reference_equilibrium().S

    def test_infectious_floor_formula(self, params_high, incidence, delays):
        # v2 = q * I1* * exp(-(mu+d+alpha)(rho+1)h) for explicit (q, rho).
        removal = params_high.removal_rate
        for q, rho in ((1e-5, 4.0), (4e-5, 8.0), (7e-5, 16.0)):
            bounds = permanence_bounds(params_high, incidence,
                                       reference_equilibrium(), delays,
                                       q=q, rho=rho)
            expected = q * REF_EQ_I * math.exp(-removal * (rho + 1.0) * (T1 + T2))
            assert bounds.v2 == pytest.approx(expected, rel=1e-12)

    def test_floor_monotonicity(self, params_high, incidence, delays):
        eq = reference_equilibrium()

        def v2(q=4e-5, rho=4.0, h1=None, h2=None):
            return permanence_bounds(params_high, incidence, eq, delays,
                                     q=q, rho=rho, h1=h1, h2=h2).v2

        assert v2(q=1e-5) < v2(q=4e-5) < v2(q=7e-5)
        assert v2(rho=4.0) > v2(rho=8.0) > v2(rho=16.0)
        assert v2(h1=T1, h2=T2) > v2(h1=2 * T1, h2=T2) > v2(h1=2 * T1, h2=2 * T2)

    def test_rejects_fraction_at_or_above_q_bar(self, params_high, incidence, delays):
        with pytest.raises(ValidationError, match="q_bar"):
            permanence_bounds(params_high, incidence, reference_equilibrium(),
                              delays, q=1e-4)

    def test_rejects_waiting_constant_too_small(self, params_high, incidence, delays):
        with pytest.raises(ValidationError, match="rho"):
            permanence_bounds(params_high, incidence, reference_equilibrium(),
                              delays, rho=2.0 ** -20)

    def test_rejects_vanishing_transmission(self, incidence, delays):
        p = make_params(1e-12)
        with pytest.raises(ValidationError, match="q_bar"):
            permanence_bounds(p, incidence, reference_equilibrium(), delays)

    def test_susceptible_floor_limits(self, incidence):
        # No transmission: the floor is the disease-free level B/mu.
        assert susceptible_floor(make_params(1e-12), incidence) == \
            pytest.approx(1.0, rel=1e-8)
        # Heavy transmission drives the floor toward zero.
        assert susceptible_floor(make_params(1e9), incidence) < 1e-9


# ============================================================================
# Combined analysis
# ============================================================================

class TestAnalyze:
    def test_subcritical_report(self, params_low, incidence, delays):
        report = analyze(params_low, incidence, delays)
        assert report.regime is Regime.EXTINCTION_BY_R0
        assert report.lam == pytest.approx(REF_LAMBDA, rel=1e-6)
        assert report.endemic is None
        assert report.permanence is None
        assert report.dfe.S == pytest.approx(1.0, rel=1e-9)
        assert report.dfe.I == 0.0

    def test_supercritical_report(self, params_high, incidence, delays):
        report = analyze(params_high, incidence, delays)
        assert report.regime is Regime.ENDEMIC_CANDIDATE
        assert report.lam is None
        assert report.endemic is None
        assert not report.endemic_condition_met

    def test_equilibrium_reported_when_root_exists(self, incidence, delays):
        report = analyze(make_params(200.0), incidence, delays)
        assert report.regime is Regime.ENDEMIC_CANDIDATE
        assert report.endemic is not None

    def test_floors_reported_when_defaults_feasible(self, incidence, delays):
        # A slow vector turnover keeps the parasite survival high, which makes
        # the equilibrium S small enough for the default envelope constants.
        report = analyze(make_params(100.0, mu_v=1.0), incidence, delays)
        assert report.endemic is not None
        assert report.permanence is not None
        assert report.permanence.v2 > 0
        assert report.permanence.s_triangle > report.endemic.S

    def test_rate_present_exactly_in_extinction_regimes(self, incidence, delays):
        for beta in (1e-3, 5e-2, 1.0, 8.5, 50.0):
            report = analyze(make_params(beta), incidence, delays)
            assert (report.lam is not None) == (report.regime in
                                                (Regime.EXTINCTION_BY_R0,
                                                 Regime.EXTINCTION_BY_SURVIVAL))
            if report.lam is not None:
                assert report.lam > 0
