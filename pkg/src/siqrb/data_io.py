"""Scenario files, observation CSVs and trajectory CSVs.

Scenario files are flat ``key = value`` text with ``#`` comments. Values are
plain numbers or a single quotient such as ``0.4/365``. Optimal-control
settings use an ``ocp.`` prefix.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from siqrb.integrator import TimeGrid, Trajectory
from siqrb.model import (
    STATE_NAMES,
    ControlSignal,
    ModelError,
    ModelParams,
    State,
    ValidatedParams,
    recruitment_from_population,
    validate_params,
)
from siqrb.ocp import OcpConfig

RATE_KEYS = ("beta", "kappa", "mu", "omega", "delta", "epsilon", "alpha1", "alpha2", "eta", "d")
STATE_KEYS = ("S0", "I0", "Q0", "R0_state", "B0")
REQUIRED_KEYS = RATE_KEYS + STATE_KEYS + ("t_final", "n_steps")
OPTIONAL_KEYS = ("lambda", "n0", "t0", "label")
OCP_KEYS = ("ocp.W", "ocp.tolerance", "ocp.relaxation", "ocp.max_iterations", "ocp.initial_control")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class ValidationError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NonMonotoneTime(ValueError):
    pass


class IoError(OSError):
    pass


@dataclass(frozen=True)
class OcpSettings:
    W: float | None = None
    tolerance: float = 1e-4
    relaxation: float = 0.5
    max_iterations: int = 500
    initial_control: float = 0.5


@dataclass(frozen=True)
class ScenarioConfig:
    params: ValidatedParams
    initial_state: State
    horizon: TimeGrid
    ocp: OcpSettings
    label: str
    n0: float | None = None

    def with_horizon(self, t_final: float | None = None, step: float | None = None) -> "ScenarioConfig":
        t_end = self.horizon.t_final if t_final is None else t_final
        h = self.horizon.h if step is None else step
        if t_final is None and step is None:
            return self
        grid = TimeGrid.from_step(self.horizon.t0, t_end, h)
        return ScenarioConfig(self.params, self.initial_state, grid, self.ocp, self.label, self.n0)

    def ocp_config(self) -> OcpConfig:
        if self.ocp.W is None:
            raise ValidationError("ocp.W", "required for optimal control")
        return OcpConfig(
            params=self.params,
            x0=np.array(self.initial_state, dtype=float),
            W=self.ocp.W,
            grid=self.horizon,
            sweep_tolerance=self.ocp.tolerance,
            max_iterations=self.ocp.max_iterations,
            relaxation=self.ocp.relaxation,
            initial_control=self.ocp.initial_control,
        )


def _number(text: str, key: str, lineno: int, path: str) -> float:
    parts = text.split("/")
    try:
        if len(parts) == 1:
            value = float(parts[0])
        elif len(parts) == 2:
            value = float(parts[0]) / float(parts[1])
        else:
            raise ValueError
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"{key}: cannot parse number {text!r}", lineno, path) from None
    if not math.isfinite(value):
        raise ParseError(f"{key}: value must be finite", lineno, path)
    return value


def parse_scenario(text: str, path: str = "<string>") -> ScenarioConfig:
    known = set(REQUIRED_KEYS + OPTIONAL_KEYS + OCP_KEYS)
    values: dict[str, float] = {}
    label = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in known:
            raise ParseError(f"unknown key {key!r}", lineno, path)
        if key in values or (key == "label" and label is not None):
            raise ParseError(f"duplicate key {key!r}", lineno, path)
        if not value:
            raise ParseError(f"{key}: missing value", lineno, path)
        if key == "label":
            label = value
        else:
            values[key] = _number(value, key, lineno, path)

    for key in REQUIRED_KEYS:
        if key not in values:
            raise ParseError(f"{key}: required", path=path)
    if ("lambda" in values) == ("n0" in values):
        raise ParseError("exactly one of 'lambda' or 'n0' must be given", path=path)

    n0 = values.get("n0")
    if n0 is not None:
        if n0 <= 0:
            raise ValidationError("n0", "must be > 0")
        recruitment = recruitment_from_population(n0)
    else:
        recruitment = values["lambda"]

    raw = ModelParams(Lambda=recruitment, **{k: values[k] for k in RATE_KEYS})
    try:
        params = validate_params(raw)
    except ModelError as exc:
        name = getattr(exc, "field", "params")
        raise ValidationError("lambda" if name == "Lambda" else name, str(exc)) from None

    state = State(*(values[k] for k in STATE_KEYS))
    for key, v in zip(STATE_KEYS, state):
        if v < 0:
            raise ValidationError(key, "initial state must be >= 0")

    n_steps = values["n_steps"]
    if n_steps != int(n_steps) or n_steps < 1:
        raise ValidationError("n_steps", "must be a positive integer")
    try:
        grid = TimeGrid(values.get("t0", 0.0), values["t_final"], int(n_steps))
    except ValueError as exc:
        raise ValidationError("t_final", str(exc)) from None

    ocp = OcpSettings(
        W=values.get("ocp.W"),
        tolerance=values.get("ocp.tolerance", OcpSettings.tolerance),
        relaxation=values.get("ocp.relaxation", OcpSettings.relaxation),
        max_iterations=int(values.get("ocp.max_iterations", OcpSettings.max_iterations)),
        initial_control=values.get("ocp.initial_control", OcpSettings.initial_control),
    )
    if ocp.W is not None and ocp.W <= 0:
        raise ValidationError("ocp.W", "must be > 0")
    if not ocp.tolerance > 0:
        raise ValidationError("ocp.tolerance", "must be > 0")
    if not 0 < ocp.relaxation <= 1:
        raise ValidationError("ocp.relaxation", "must lie in (0, 1]")
    if ocp.max_iterations < 1:
        raise ValidationError("ocp.max_iterations", "must be >= 1")
    if not 0 <= ocp.initial_control <= 1:
        raise ValidationError("ocp.initial_control", "must lie in [0, 1]")

    return ScenarioConfig(params, state, grid, ocp, label or Path(path).stem, n0)


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read scenario {path}: {exc.strerror or exc}") from exc
    return parse_scenario(text, str(path))


@dataclass(frozen=True)
class ObservationSeries:
    times: np.ndarray
    infectious_counts: np.ndarray


def load_observations(path) -> ObservationSeries:
    """Read a ``day,infectious`` CSV; ``#`` lines are comments."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [(n, r) for n, r in enumerate(csv.reader(fh), start=1)
                    if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise IoError(f"cannot read observations {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise ParseError("missing header 'day,infectious'", path=str(path))
    header_line, header = rows[0]
    if [h.strip() for h in header] != ["day", "infectious"]:
        raise ParseError(f"expected header 'day,infectious', got {','.join(header)!r}", header_line, str(path))
    if len(rows) == 1:
        raise ParseError("no rows", path=str(path))
    times, counts = [], []
    for lineno, row in rows[1:]:
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", lineno, str(path))
        try:
            t, c = float(row[0]), float(row[1])
        except ValueError:
            raise ParseError(f"non-numeric row {','.join(row)!r}", lineno, str(path)) from None
        if c < 0:
            raise ParseError("infectious count must be >= 0", lineno, str(path))
        times.append(t)
        counts.append(c)
    times_arr = np.array(times)
    if np.any(np.diff(times_arr) <= 0):
        raise NonMonotoneTime(f"{path}: observation days must be strictly increasing")
    return ObservationSeries(times_arr, np.array(counts))


def trajectory_columns(control: bool, adjoint: bool) -> list[str]:
    cols = ["t", *STATE_NAMES]
    if control:
        cols.append("u")
    if adjoint:
        cols.extend(f"lambda{i}" for i in range(1, 6))
    return cols


def write_trajectory(traj: Trajectory, path, control: ControlSignal | None = None,
                     adjoint: Trajectory | None = None) -> None:
    """Write one CSV row per grid point using shortest round-trip floats."""
    n = traj.states.shape[0]
    blocks = [traj.times[:, None], traj.states]
    if control is not None:
        if control.values.shape[0] != n:
            raise ValueError("control is not aligned with the trajectory grid")
        blocks.append(control.values[:, None])
    if adjoint is not None:
        if adjoint.states.shape[0] != n:
            raise ValueError("adjoint is not aligned with the trajectory grid")
        blocks.append(adjoint.states)
    table = np.hstack(blocks)
    header = ",".join(trajectory_columns(control is not None, adjoint is not None))
    try:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            for row in table:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_trajectory(path) -> dict[str, np.ndarray]:
    """Read a trajectory CSV back into named float columns."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    return {name: data[:, i] for i, name in enumerate(header)}


def write_table(path, header: list[str], rows) -> None:
    """Write a small CSV table; floats are formatted for exact round trips."""
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    try:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc
