"""Shared fixtures: the reference parameter set and the two long scenarios."""

import pytest

from seirs_delay import (
    DimensionlessParams,
    PointMass,
    SimulationConfig,
    State,
    holling2,
    simulate,
)

# Reference dimensionless parameter values (constant birth/death rates, a
# fast vector turnover, and the three incubation/immunity delays).
BASE = dict(B=8.476678e-06, mu=8.476678e-06, mu_v=42.85714,
            d=0.0001761252, alpha=0.08571429)
BETA_LOW = 0.02146383    # subcritical transmission: extinction scenario
BETA_HIGH = 7.941616     # supercritical transmission: persistence scenario
T1, T2, T3 = 0.105, 0.175, 2.129167

# Reference outputs the scenarios are judged against.
REF_R0_LOW = 0.2498732
REF_R0_HIGH = 92.45307
REF_LAMBDA = 0.06443506
REF_ESPR = 0.01110898
REF_INV_R0_HIGH = 0.0108163
REF_EQ_S, REF_EQ_E, REF_EQ_I = 6.281296e-06, 0.0006840553, 0.04550565
REF_V1 = 4.269316e-05

INITIAL_FRACTIONS = (10.0 / 23.0, 5.0 / 23.0, 6.0 / 23.0, 2.0 / 23.0)


def make_params(beta, **overrides):
    values = dict(BASE, beta=beta)
    values.update(overrides)
    return DimensionlessParams(**values)


def point_delays():
    return (PointMass(T1), PointMass(T2), PointMass(T3))


@pytest.fixture
def params_low():
    return make_params(BETA_LOW)


@pytest.fixture
def params_high():
    return make_params(BETA_HIGH)


@pytest.fixture
def delays():
    return point_delays()


@pytest.fixture
def incidence():
    return holling2(0.05)


RUN_SECONDS = {}


def run_scenario(beta, dt, t_end):
    import time

    cfg = SimulationConfig(history=State(*INITIAL_FRACTIONS), dt=dt, t_end=t_end)
    start = time.perf_counter()
    traj = simulate(make_params(beta), holling2(0.05), point_delays(), cfg)
    RUN_SECONDS[(beta, dt)] = time.perf_counter() - start
    return traj


@pytest.fixture(scope="session")
def extinction_run():
    """Subcritical scenario integrated to t=1000 at dt=1e-3."""
    return run_scenario(BETA_LOW, 1e-3, 1000.0)


@pytest.fixture(scope="session")
def persistence_run():
    """Supercritical scenario integrated to t=1000 at dt=1e-3."""
    return run_scenario(BETA_HIGH, 1e-3, 1000.0)


@pytest.fixture(scope="session")
def persistence_run_halved():
    """Supercritical scenario at dt=5e-4 for the step-halving comparison."""
    return run_scenario(BETA_HIGH, 5e-4, 1000.0)
