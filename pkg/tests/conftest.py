import numpy as np
import pytest
from hypothesis import strategies as st

from siqrb.cli import resolve_scenario
from siqrb.data_io import load_scenario
from siqrb.integrator import TimeGrid
from siqrb.model import ModelParams, recruitment_from_population, validate_params

TABLE1 = dict(
    Lambda=recruitment_from_population(7450),
    mu=2.2493e-5,
    beta=0.8,
    kappa=1e6,
    omega=0.4 / 365,
    delta=0.05,
    epsilon=0.2,
    alpha1=0.015,
    alpha2=0.0001,
    eta=10.0,
    d=0.33,
)
TABLE1_X0 = np.array([5750.0, 1700.0, 0.0, 0.0, 275e3])


@pytest.fixture
def params():
    return validate_params(ModelParams(**TABLE1))


@pytest.fixture
def sib_params(params):
    return params.replace(omega=0.0, delta=0.0, epsilon=0.0, alpha2=0.0)


@pytest.fixture
def x0():
    return TABLE1_X0.copy()


@pytest.fixture
def grid182():
    return TimeGrid(0.0, 182.0, 3640)


@pytest.fixture
def siqrb_scenario_path():
    return resolve_scenario("haiti_siqrb.scn")


@pytest.fixture
def sib_scenario_path():
    return resolve_scenario("haiti_sib.scn")


@pytest.fixture
def sample_obs_path():
    return resolve_scenario("haiti_sample.csv")


@pytest.fixture
def siqrb_scenario(siqrb_scenario_path):
    return load_scenario(siqrb_scenario_path)


def log_uniform(lo, hi):
    return st.floats(np.log(lo), np.log(hi)).map(np.exp)


# Broad ranges around the Artibonite values; optional rates may be exactly zero.
valid_params = st.builds(
    lambda **kw: validate_params(ModelParams(**kw)),
    Lambda=log_uniform(1e-2, 1e2),
    mu=log_uniform(1e-6, 1e-2),
    beta=log_uniform(1e-3, 5.0),
    kappa=log_uniform(1e3, 1e8),
    omega=st.one_of(st.just(0.0), log_uniform(1e-5, 1e-1)),
    delta=st.one_of(st.just(0.0), log_uniform(1e-4, 1.0)),
    epsilon=st.one_of(st.just(0.0), log_uniform(1e-3, 1.0)),
    alpha1=st.one_of(st.just(0.0), log_uniform(1e-4, 1e-1)),
    alpha2=st.one_of(st.just(0.0), log_uniform(1e-5, 1e-1)),
    eta=log_uniform(1e-1, 1e2),
    d=log_uniform(1e-2, 2.0),
)


def random_params(rng: np.random.Generator):
    """Plain-numpy counterpart of ``valid_params`` for fixed-count loops."""
    def lu(lo, hi):
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    def opt(lo, hi):
        return 0.0 if rng.random() < 0.15 else lu(lo, hi)

    return validate_params(ModelParams(
        Lambda=lu(1e-2, 1e2), mu=lu(1e-6, 1e-2), beta=lu(1e-3, 5.0), kappa=lu(1e3, 1e8),
        omega=opt(1e-5, 1e-1), delta=opt(1e-4, 1.0), epsilon=opt(1e-3, 1.0),
        alpha1=opt(1e-4, 1e-1), alpha2=opt(1e-5, 1e-1), eta=lu(1e-1, 1e2), d=lu(1e-2, 2.0),
    ))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
