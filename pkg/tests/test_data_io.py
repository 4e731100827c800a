import numpy as np
import pytest

from conftest import TABLE1
from siqrb.analysis import basic_reproduction_number
from siqrb.data_io import (
    IoError,
    NonMonotoneTime,
    ParseError,
    ValidationError,
    load_observations,
    load_scenario,
    parse_scenario,
    read_trajectory,
    trajectory_columns,
    write_trajectory,
)
from siqrb.integrator import TimeGrid, integrate_forward
from siqrb.model import ControlSignal, uncontrolled_rhs


def _scenario_text(siqrb_scenario_path):
    return siqrb_scenario_path.read_text(encoding="utf-8")


def test_shipped_scenario_matches_table1(siqrb_scenario):
    sc = siqrb_scenario
    for key, value in TABLE1.items():
        assert getattr(sc.params, key) == pytest.approx(value, rel=1e-15), key
    assert sc.initial_state == (5750.0, 1700.0, 0.0, 0.0, 275000.0)
    assert sc.horizon == TimeGrid(0.0, 182.0, 3640)
    assert sc.ocp.W == 2000.0 and sc.ocp.tolerance == 1e-4
    assert sc.label == "haiti_siqrb" and sc.n0 == 7450


def test_missing_beta(siqrb_scenario_path):
    text = "\n".join(l for l in _scenario_text(siqrb_scenario_path).splitlines() if not l.startswith("beta"))
    with pytest.raises(ParseError, match="beta: required"):
        parse_scenario(text)


def test_explicit_lambda_equivalent_to_n0_form(siqrb_scenario_path, siqrb_scenario):
    text = _scenario_text(siqrb_scenario_path).replace("n0 = 7450", "lambda = 0.49803")
    sc = parse_scenario(text)
    assert sc.n0 is None and sc.params.Lambda == 0.49803
    r_formula = basic_reproduction_number(siqrb_scenario.params)
    assert basic_reproduction_number(sc.params) == pytest.approx(r_formula, rel=1e-4)


def test_lambda_and_n0_are_exclusive(siqrb_scenario_path):
    text = _scenario_text(siqrb_scenario_path) + "\nlambda = 0.5\n"
    with pytest.raises(ParseError, match="exactly one"):
        parse_scenario(text)


@pytest.mark.parametrize("line, match", [
    ("gamma = 1", "unknown key"),
    ("mu = 1e-5", "duplicate key"),
    ("just some words", "key = value"),
])
def test_parse_errors_carry_line_numbers(siqrb_scenario_path, line, match):
    text = _scenario_text(siqrb_scenario_path) + "\n" + line + "\n"
    with pytest.raises(ParseError, match=match) as exc:
        parse_scenario(text, "x.scn")
    assert exc.value.line == text.count("\n")


@pytest.mark.parametrize("key, bad", [("beta", "0"), ("delta", "-0.1"), ("I0", "-1"), ("ocp.W", "0")])
def test_validation_errors_name_the_field(siqrb_scenario_path, key, bad):
    lines = _scenario_text(siqrb_scenario_path).splitlines()
    lines = [f"{key} = {bad}" if l.split("=")[0].strip() == key else l for l in lines]
    with pytest.raises(ValidationError) as exc:
        parse_scenario("\n".join(lines))
    assert exc.value.field == key


def test_quotient_values_and_bad_numbers(siqrb_scenario_path):
    assert parse_scenario(_scenario_text(siqrb_scenario_path)).params.omega == 0.4 / 365
    bad = _scenario_text(siqrb_scenario_path).replace("omega = 0.4/365", "omega = 0.4/0")
    with pytest.raises(ParseError, match="omega"):
        parse_scenario(bad)


def test_missing_scenario_file(tmp_path):
    with pytest.raises(IoError):
        load_scenario(tmp_path / "nope.scn")


def test_scenario_loading_is_deterministic(siqrb_scenario_path):
    assert load_scenario(siqrb_scenario_path) == load_scenario(siqrb_scenario_path)


def test_shipped_observations(sample_obs_path):
    obs = load_observations(sample_obs_path)
    assert obs.times[0] == 0 and obs.infectious_counts[0] == 1700
    assert np.all(np.diff(obs.times) > 0)
    assert np.all(obs.infectious_counts >= 0)


def test_observations_without_rows(tmp_path):
    path = tmp_path / "obs.csv"
    path.write_text("# nothing yet\nday,infectious\n")
    with pytest.raises(ParseError, match="no rows"):
        load_observations(path)


def test_observations_shuffled(tmp_path):
    path = tmp_path / "obs.csv"
    path.write_text("day,infectious\n0,1700\n14,900\n7,1200\n")
    with pytest.raises(NonMonotoneTime):
        load_observations(path)


def test_observations_bad_header(tmp_path):
    path = tmp_path / "obs.csv"
    path.write_text("t,I\n0,1\n")
    with pytest.raises(ParseError, match="day,infectious"):
        load_observations(path)


def test_dfe_run_writes_constant_rows(params, tmp_path):
    dfe = np.array([params.Lambda / params.mu, 0, 0, 0, 0])
    grid = TimeGrid(0, 1, 10)
    traj = integrate_forward(lambda t, x: uncontrolled_rhs(x, params), dfe, grid)
    path = tmp_path / "dfe.csv"
    write_trajectory(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,S,I,Q,R,B"
    assert len(lines) == 12
    cols = read_trajectory(path)
    assert np.all(cols["S"] == cols["S"][0])


def test_round_trip_is_bit_exact(params, x0, tmp_path):
    grid = TimeGrid(0, 30, 600)
    u = ControlSignal(grid.times, 0.5 + 0.4 * np.sin(grid.times))
    traj = integrate_forward(lambda t, x: uncontrolled_rhs(x, params), x0, grid)
    adj = integrate_forward(lambda t, x: -1e-3 * x, np.arange(1.0, 6.0) / 3, grid)
    path = tmp_path / "traj.csv"
    write_trajectory(traj, path, control=u, adjoint=adj)
    cols = read_trajectory(path)
    assert list(cols) == trajectory_columns(True, True)
    assert np.array_equal(cols["t"], traj.times)
    assert np.array_equal(np.column_stack([cols[c] for c in "SIQRB"]), traj.states)
    assert np.array_equal(cols["u"], u.values)
    assert np.array_equal(np.column_stack([cols[f"lambda{i}"] for i in range(1, 6)]), adj.states)


def test_write_rejects_misaligned_control(params, x0, tmp_path):
    grid = TimeGrid(0, 1, 10)
    traj = integrate_forward(lambda t, x: uncontrolled_rhs(x, params), x0, grid)
    with pytest.raises(ValueError):
        write_trajectory(traj, tmp_path / "a.csv", control=ControlSignal.constant(np.linspace(0, 1, 5), 0.0))
    with pytest.raises(IoError):
        write_trajectory(traj, tmp_path / "missing" / "a.csv")
