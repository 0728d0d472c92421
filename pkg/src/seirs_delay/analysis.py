"""Closed-form thresholds and equilibria for the delayed SEIRS system.

Provides the basic reproduction numbers, the expected parasite survival
probability over the two-host incubation cycle, the endemic equilibrium as
the unique positive root of a scalar monotone function, the exponential
extinction rate, and the long-run permanence floors.

Everything operates on immutable inputs and returns plain values, so the
functions are safe to call concurrently (parameter sweeps fan out freely).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .model_core import (
    DelaySpec,
    DimensionlessParams,
    IncidenceModel,
    NumericsError,
    State,
    ValidationError,
    exp_moment,
)

# Lower end of the root bracket for the equilibrium equation; the infectious
# coordinate of any feasible equilibrium is strictly positive and at most B/mu.
ROOT_BRACKET_LO = 1e-14
BISECTION_WIDTH = 1e-14
NEWTON_POLISH_STEPS = 5


class Regime(enum.Enum):
    """Long-run classification implied by the threshold quantities."""

    EXTINCTION_BY_R0 = "ExtinctionByR0"
    EXTINCTION_BY_SURVIVAL = "ExtinctionBySurvival"
    ENDEMIC_CANDIDATE = "EndemicCandidate"
    INDETERMINATE = "Indeterminate"


# ============================================================================
# Reproduction numbers and parasite survival
# ============================================================================

def brn_constant_delays(p: DimensionlessParams) -> float:
    """Basic reproduction number for fixed delays: beta / (mu + d + alpha)."""
    return p.beta / p.removal_rate


def brn_random_delays(p: DimensionlessParams) -> float:
    """Proportionality value of the reproduction number under random delays.

    Computed as beta/(mu+d+alpha) + alpha/(mu+d+alpha).  This is the stated
    proportionality expression, not an exact reproduction number; the second
    term accounts for recovered individuals re-entering circulation.
    """
    return (p.beta + p.alpha) / p.removal_rate


def espr(p: DimensionlessParams, t1: DelaySpec, t2: DelaySpec) -> float:
    """Expected survival probability rate E[exp(-mu_v*T1 - mu*T2)].

    T1 and T2 are independent, so the double integral factors into the
    product of the two one-dimensional expectations.  Point-mass delays make
    this exact (no quadrature error).
    """
    return exp_moment(t1, p.mu_v) * exp_moment(t2, p.mu)


# ============================================================================
# Endemic equilibrium
# ============================================================================

@dataclass(frozen=True)
class EndemicEquilibrium:
    """Nonzero steady state (S1*, E1*, I1*, R1*) of the dimensionless system."""

    S: float
    E: float
    I: float
    R: float

    def as_state(self) -> State:
        return State(self.S, self.E, self.I, self.R)


def equilibrium_function(p: DimensionlessParams, G: IncidenceModel,
                         delays: Tuple[DelaySpec, DelaySpec, DelaySpec]
                         ) -> Callable[[float], float]:
    """The scalar function H whose unique positive root is I1*.

    Eliminating S between the steady-state susceptible and infectious
    equations leaves

        H(I) = B - I/espr * [ (mu+d+alpha)*mu / (beta*G(I))
                              + (mu+d)*E1 + alpha*E1*(1 - E2*E3) ]

    with E1 = E[e^(-mu_v T1)], E2 = E[e^(-mu T2)], E3 = E[e^(-mu T3)] and
    espr = E1*E2.  H is strictly decreasing on I > 0 for any incidence
    satisfying the axioms, so a root exists exactly when H(0+) > 0.
    """
    t1, t2, t3 = delays
    e1 = exp_moment(t1, p.mu_v)
    e2 = exp_moment(t2, p.mu)
    e3 = exp_moment(t3, p.mu)
    surv = e1 * e2
    linear_term = (p.mu + p.d) * e1 + p.alpha * e1 * (1.0 - e2 * e3)
    md_a_mu = p.removal_rate * p.mu

    def H(I: float) -> float:
        return p.B - (I / surv) * (md_a_mu / (p.beta * G(I)) + linear_term)

    return H


def _h_at_origin(p: DimensionlessParams, G: IncidenceModel, surv: float) -> float:
    """Limit of H as I -> 0+, where G(I)/I -> G'(0)."""
    denom = p.beta * G.dG0 * surv
    if denom <= 0.0:
        return -math.inf
    return p.B * (1.0 - p.removal_rate / denom)


def endemic_existence_condition(p: DimensionlessParams, G: IncidenceModel,
                                espr_value: float) -> bool:
    """Sufficient existence condition for the endemic equilibrium.

    Requires the random-delay reproduction value above 1 together with
    espr >= R0 / ((R0 - alpha/(mu+d+alpha)) * G'(0)); this implies
    H(0+) > 0 but is strictly stronger than it.
    """
    r0 = brn_random_delays(p)
    if r0 <= 1.0 or G.dG0 <= 0.0:
        return False
    threshold = r0 / ((r0 - p.alpha / p.removal_rate) * G.dG0)
    return espr_value >= threshold


def endemic_equilibrium(p: DimensionlessParams, G: IncidenceModel,
                        delays: Tuple[DelaySpec, DelaySpec, DelaySpec]
                        ) -> Optional[EndemicEquilibrium]:
    """Solve for the endemic equilibrium, or return None when none exists.

    The infectious coordinate is the unique positive root of H (see
    :func:`equilibrium_function`), bracketed in [1e-14, B/mu]: bisection to
    width 1e-14 followed by a few Newton polish steps.  The remaining
    coordinates follow from the steady-state balance equations:

        S1* = (mu+d+alpha)*I1* / (beta*G(I1*)*espr)
        E1* = (mu+d+alpha)*I1* * (1/E2 - 1) / mu
        R1* = alpha*I1* * (1 - E3) / mu

    Returns None rather than raising when H(0+) <= 0 or when the root would
    exceed the feasible ceiling B/mu (the disease-free state is then the
    only equilibrium).

    Raises:
        NumericsError: if the polish stage fails to drive the residual down,
            with the residual in the message.
    """
    t1, t2, t3 = delays
    e2 = exp_moment(t2, p.mu)
    e3 = exp_moment(t3, p.mu)
    surv = exp_moment(t1, p.mu_v) * e2

    if _h_at_origin(p, G, surv) <= 0.0:
        return None

    H = equilibrium_function(p, G, delays)
    lo, hi = ROOT_BRACKET_LO, p.s0
    h_lo = H(lo)
    if h_lo <= 0.0:
        return None
    if H(hi) > 0.0:
        # H is still positive at the feasibility ceiling: any root would sit
        # above B/mu, which no bounded solution can reach.
        return None

    while hi - lo > BISECTION_WIDTH:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if H(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)

    # Newton polish with a finite-difference slope; H is smooth and strictly
    # decreasing here, so a handful of steps reaches rounding level.
    for _ in range(NEWTON_POLISH_STEPS):
        f = H(root)
        if f == 0.0:
            break
        step = max(1e-9 * root, 1e-16)
        slope = (H(root + step) - H(root - step)) / (2.0 * step)
        if not math.isfinite(slope) or slope == 0.0:
            break
        candidate = root - f / slope
        if not (lo * 0.5 <= candidate <= hi * 2.0) or candidate <= 0.0:
            break
        root = candidate

    residual = H(root)
    if not math.isfinite(residual) or abs(residual) > 1e-6 * p.B:
        raise NumericsError(
            f"equilibrium root polish did not converge; residual {residual:.3e}")

    i_star = root
    s_star = p.removal_rate * i_star / (p.beta * float(G(i_star)) * surv)
    e_star = p.removal_rate * i_star * (1.0 / e2 - 1.0) / p.mu
    r_star = p.alpha * i_star * (1.0 - e3) / p.mu
    return EndemicEquilibrium(S=s_star, E=e_star, I=i_star, R=r_star)


def equilibrium_residuals(p: DimensionlessParams, G: IncidenceModel,
                          delays: Tuple[DelaySpec, DelaySpec, DelaySpec],
                          eq: EndemicEquilibrium) -> Tuple[float, float]:
    """Residuals of the steady-state (S, I) balance equations at eq.

    Returns the pair (susceptible-equation residual, infectious-equation
    residual); both vanish at a true equilibrium.
    """
    t1, t2, t3 = delays
    e1 = exp_moment(t1, p.mu_v)
    e3 = exp_moment(t3, p.mu)
    surv = e1 * exp_moment(t2, p.mu)
    g = float(G(eq.I))
    res_s = p.B - p.beta * e1 * eq.S * g - p.mu * eq.S + p.alpha * e3 * eq.I
    res_i = p.beta * surv * eq.S * g - p.removal_rate * eq.I
    return res_s, res_i


# ============================================================================
# Extinction
# ============================================================================

def extinction_check(p: DimensionlessParams, espr_value: float
                     ) -> Tuple[Regime, Optional[float]]:
    """Classify the extinction regime and give the exponential decay rate.

    With R0* = beta/(mu+d+alpha):

      * R0* < 1: extinction regardless of parasite survival, at rate
        lambda = (1 - R0*)(mu + d + alpha).
      * R0* >= 1 but espr < 1/R0*: the parasite is unlikely to survive its
        full two-host cycle; extinction at rate
        lambda = beta*(B/mu)*(1/R0* - espr).
      * Otherwise no extinction guarantee (endemic candidate), lambda absent.

    Args:
        p: dimensionless parameters.
        espr_value: E[exp(-mu_v*T1 - mu*T2)], in (0, 1].

    Returns:
        (regime, lambda) with lambda None outside the extinction regimes.
    """
    if not 0.0 < espr_value <= 1.0:
        raise ValidationError(f"espr must lie in (0, 1], got {espr_value!r}")
    r0_star = brn_constant_delays(p)
    if r0_star < 1.0:
        return Regime.EXTINCTION_BY_R0, (1.0 - r0_star) * p.removal_rate
    if espr_value < 1.0 / r0_star:
        lam = p.beta * p.s0 * (1.0 / r0_star - espr_value)
        return Regime.EXTINCTION_BY_SURVIVAL, lam
    return Regime.ENDEMIC_CANDIDATE, None


# ============================================================================
# Permanence bounds
# ============================================================================

@dataclass(frozen=True)
class PermanenceBounds:
    """Asymptotic floors for the susceptible and infectious states.

    v1 bounds liminf S(t); v2 = q*I1**exp(-(mu+d+alpha)(rho+1)h) bounds
    liminf I(t) for a fraction q in (0, q_bar) and a waiting constant rho
    large enough that the susceptible envelope s_triangle clears S1*.
    """

    v1: float
    v2: float
    q_bar: float
    q: float
    rho: float
    s_triangle: float
    h: float


def susceptible_floor(p: DimensionlessParams, G: IncidenceModel) -> float:
    """Asymptotic floor v1 = B / (mu + beta*G(B/mu)) for the susceptibles.

    Tends to B/mu (the disease-free level) as transmission stops and to
    zero as beta grows without bound.
    """
    return p.B / (p.mu + p.beta * float(G(p.s0)))


def permanence_bounds(p: DimensionlessParams, G: IncidenceModel,
                      equilibrium: EndemicEquilibrium,
                      delays: Tuple[DelaySpec, DelaySpec, DelaySpec],
                      q: Optional[float] = None,
                      rho: Optional[float] = None,
                      h1: Optional[float] = None,
                      h2: Optional[float] = None) -> PermanenceBounds:
    """Compute the permanence floors around an endemic equilibrium.

    Args:
        p, G, delays: model ingredients (delays feed the exponential moments
            E[e^(-mu T1)] and E[e^(-mu T3)]).
        equilibrium: the endemic steady state the floors are anchored to.
        q: fraction of I1* used for the infectious floor; defaults to
            q_bar/2.  Must satisfy 0 < q < q_bar.
        rho: waiting constant; defaults to the smallest power of two making
            s_triangle exceed S1* by a relative margin of 1e-6.
        h1, h2: delay horizons for T1 and T2; default to the spec supports.

    Raises:
        ValidationError: when q falls outside (0, q_bar), or when the given
            rho leaves s_triangle <= S1* (choose a larger rho).
    """
    t1, t2, t3 = delays
    s1, i1 = equilibrium.S, equilibrium.I
    if i1 <= 0:
        raise ValidationError("permanence bounds need a strictly positive I1*")
    if p.beta <= 0:
        raise ValidationError("permanence bounds need beta > 0")
    e_mu_t1 = exp_moment(t1, p.mu)
    e3 = exp_moment(t3, p.mu)
    g_i1 = float(G(i1))

    v1 = susceptible_floor(p, G)

    q_bar = ((p.B * p.beta * e_mu_t1 * g_i1 - p.mu * p.alpha * e3 * i1)
             / ((p.B + p.alpha * e3 * i1) * p.beta * i1))
    if q_bar <= 0:
        raise ValidationError(
            f"q_bar = {q_bar:.3e} is not positive; permanence hypotheses fail here")

    if q is None:
        q = 0.5 * q_bar
    if not 0.0 < q < q_bar:
        raise ValidationError(f"q must lie in (0, q_bar={q_bar:.6g}), got {q!r}")

    if h1 is None:
        h1 = t1.horizon
    if h2 is None:
        h2 = t2.horizon
    h = h1 + h2
    if h <= 0:
        raise ValidationError("total delay horizon h1 + h2 must be positive")

    k = p.mu + p.beta * float(G(q * i1))
    target = s1 * (1.0 + 1e-6)

    def envelope(r: float) -> float:
        return (p.B / k) * (1.0 - math.exp(-k * r * h))

    if rho is None:
        rho = 2.0 ** -20
        while rho <= 2.0 ** 60:
            if envelope(rho) > target:
                break
            rho *= 2.0
        else:
            raise ValidationError(
                "no power-of-two rho makes the susceptible envelope clear S1*; "
                f"ceiling B/k = {p.B / k:.6g} vs S1* = {s1:.6g}")
    s_triangle = envelope(rho)
    if s_triangle <= s1:
        raise ValidationError(
            f"s_triangle = {s_triangle:.6g} does not exceed S1* = {s1:.6g}; "
            "increase rho")

    v2 = q * i1 * math.exp(-p.removal_rate * (rho + 1.0) * h)
    return PermanenceBounds(v1=v1, v2=v2, q_bar=q_bar, q=q, rho=rho,
                            s_triangle=s_triangle, h=h)


# ============================================================================
# Combined report
# ============================================================================

@dataclass(frozen=True)
class AnalysisReport:
    """Everything the closed-form analysis can say about a parameter set."""

    dfe: State
    r0_star: float
    r0_random: float
    espr: float
    regime: Regime
    lam: Optional[float]
    endemic: Optional[EndemicEquilibrium]
    endemic_condition_met: bool
    permanence: Optional[PermanenceBounds]


def analyze(p: DimensionlessParams, G: IncidenceModel,
            delays: Tuple[DelaySpec, DelaySpec, DelaySpec],
            q: Optional[float] = None,
            rho: Optional[float] = None) -> AnalysisReport:
    """Run the full closed-form analysis for one parameter set.

    The endemic block is present exactly when the equilibrium root exists;
    the permanence block additionally needs the q_bar hypotheses to hold
    (it is dropped, not raised, when they fail).
    """
    t1, t2, _ = delays
    espr_value = espr(p, t1, t2)
    regime, lam = extinction_check(p, espr_value)
    equilibrium = endemic_equilibrium(p, G, delays)
    bounds = None
    if equilibrium is not None:
        try:
            bounds = permanence_bounds(p, G, equilibrium, delays, q=q, rho=rho)
        except ValidationError:
            bounds = None
    return AnalysisReport(
        dfe=State(p.s0, 0.0, 0.0, 0.0),
        r0_star=brn_constant_delays(p),
        r0_random=brn_random_delays(p),
        espr=espr_value,
        regime=regime,
        lam=lam,
        endemic=equilibrium,
        endemic_condition_met=endemic_existence_condition(p, G, espr_value),
        permanence=bounds,
    )
