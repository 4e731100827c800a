"""Command-line driver: ``siqrb {analyze,simulate,optimize,compare,sweep}``.

Exit codes: 0 on success, 1 on a domain error (bad scenario values, failed
integration, non-converged sweep), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from siqrb.analysis import (
    basic_reproduction_number,
    bifurcation_coefficients,
    dfe_stability,
    disease_free_equilibrium,
    endemic_equilibrium,
)
from siqrb.data_io import (
    IoError,
    NonMonotoneTime,
    ParseError,
    ScenarioConfig,
    ValidationError,
    load_observations,
    load_scenario,
    write_table,
    write_trajectory,
)
from siqrb.integrator import IntegrationError, integrate_forward, total_cost
from siqrb.model import PARAM_NAMES, STATE_NAMES, ControlSignal, ModelError, controlled_rhs, uncontrolled_rhs
from siqrb.ocp import forward_backward_sweep, simulate_controlled
from siqrb.plot import Series, render_plot

log = logging.getLogger("siqrb")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class CommandOutcome:
    exit_code: int
    artifacts: list[str] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)
    data: dict = field(default_factory=dict)


def resolve_scenario(name: str) -> Path:
    """Return ``name`` as a path, falling back to the bundled scenarios."""
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("siqrb") / "scenarios" / path.name
    if bundled.is_file():
        return Path(str(bundled))
    for suffix in (".scn", ".csv"):
        candidate = resources.files("siqrb") / "scenarios" / (path.name + suffix)
        if candidate.is_file():
            return Path(str(candidate))
    return path


def _load(args) -> ScenarioConfig:
    scenario = load_scenario(resolve_scenario(args.scenario))
    return scenario.with_horizon(t_final=getattr(args, "t_final", None), step=args.step)


def _out_dir(args, scenario: ScenarioConfig) -> Path:
    out = Path(args.out) if args.out else Path("out") / scenario.label
    out.mkdir(parents=True, exist_ok=True)
    return out


def _state_dict(state) -> dict[str, float]:
    return {name: float(v) for name, v in zip(STATE_NAMES, state)}


def _fmt_state(state) -> str:
    return "(" + ", ".join(f"{v:.4f}" for v in state) + ")"


def cmd_analyze(args) -> CommandOutcome:
    scenario = _load(args)
    p = scenario.params
    r0 = basic_reproduction_number(p)
    dfe = disease_free_equilibrium(p)
    ee = endemic_equilibrium(p)
    verdict = dfe_stability(p)
    data = {
        "label": scenario.label,
        "R0": r0,
        "params": p.as_dict(),
        "dfe": {"state": _state_dict(dfe.state), "residual_norm": dfe.residual_norm},
        "endemic": None if ee is None else {
            "state": _state_dict(ee.state), "residual_norm": ee.residual_norm, "lambda_star": ee.lambda_star},
        "dfe_stability": {"classification": verdict.classification, "routh_margin": verdict.routh_margin},
    }
    lines = [
        f"R0 = {r0:.6g}",
        f"DFE = {_fmt_state(dfe.state)}",
        "endemic equilibrium: none: R0 <= 1" if ee is None else
        f"endemic equilibrium = {_fmt_state(ee.state)} (residual {ee.residual_norm:.2e}, lambda* = {ee.lambda_star:.6g})",
        f"DFE stability: {verdict.classification} (routh margin {verdict.routh_margin:.6g})",
    ]
    if args.bifurcation:
        bc = bifurcation_coefficients(p)
        data["bifurcation"] = {"a": bc.a, "b": bc.b, "beta_star": bc.beta_star,
                               "w": bc.w.tolist(), "v": bc.v.tolist()}
        lines.append(f"bifurcation at beta* = {bc.beta_star:.6g}: a = {bc.a:.6g}, b = {bc.b:.6g}")
    return CommandOutcome(EXIT_OK, [], lines, data)


def _state_plots(out: Path, times, states, label: str, prefix: str = "") -> list[str]:
    paths = []
    for i, name in enumerate(STATE_NAMES):
        path = out / f"{prefix}{name}.svg"
        render_plot([Series(name, times, states[:, i])], path, title=f"{label}: {name}(t)", ylabel=name)
        paths.append(str(path))
    return paths


def cmd_simulate(args) -> CommandOutcome:
    scenario = _load(args)
    p = scenario.params
    grid = scenario.horizon
    if args.control_constant is None:
        traj = integrate_forward(lambda t, x: uncontrolled_rhs(x, p), scenario.initial_state, grid,
                                 clamp_nonnegative=True)
        control = None
    else:
        u = args.control_constant
        if not 0 <= u <= 1:
            raise UsageError("--control-constant must lie in [0, 1]")
        control = ControlSignal.constant(grid.times, u)
        traj = integrate_forward(lambda t, x: controlled_rhs(x, u, p), scenario.initial_state, grid,
                                 clamp_nonnegative=True)
    out = _out_dir(args, scenario)
    csv_path = out / "trajectory.csv"
    write_trajectory(traj, csv_path, control=control)
    artifacts = [str(csv_path)]
    if args.plot:
        artifacts += _state_plots(out, traj.times, traj.states, scenario.label)
    I = traj.states[:, 1]
    k = int(np.argmax(I))
    data = {
        "label": scenario.label,
        "rows": int(traj.states.shape[0]),
        "step": grid.h,
        "terminal": _state_dict(traj.states[-1]),
        "peak_I": float(I[k]),
        "peak_time": float(traj.times[k]),
        "max_clamped": traj.max_clamped,
    }
    lines = [
        f"integrated {grid.n_steps} steps of h = {grid.h:g} over [{grid.t0:g}, {grid.t_final:g}]",
        f"terminal state = {_fmt_state(traj.states[-1])}",
        f"peak I = {I[k]:.4f} at t = {traj.times[k]:g}",
    ]
    return CommandOutcome(EXIT_OK, artifacts, lines, data)


def cmd_optimize(args) -> CommandOutcome:
    scenario = _load(args)
    if scenario.ocp.W is None:
        raise UsageError("scenario has no ocp.W; the optimize command needs a cost weight")
    config = scenario.ocp_config()
    sol = forward_backward_sweep(config)
    times = sol.times
    out = _out_dir(args, scenario)
    csv_path = out / "optimal.csv"
    write_trajectory(sol.state_traj, csv_path, control=sol.control, adjoint=sol.adjoint_traj)
    hist_path = out / "convergence.csv"
    write_table(hist_path, ["iteration", "J", "control_change"],
                [(i + 1, j, c) for i, (j, c) in enumerate(sol.history)])
    artifacts = [str(csv_path), str(hist_path)]
    if not args.no_plot:
        ctrl_path = out / "control.svg"
        render_plot([Series("u", times, sol.control.values)], ctrl_path,
                    title=f"{scenario.label}: optimal control", ylabel="u", y_range=(0.0, 1.0))
        artifacts.append(str(ctrl_path))
        artifacts += _state_plots(out, times, sol.state_traj.states, scenario.label, prefix="optimal_")

    baselines = {}
    for const in (0.0, 1.0):
        ctrl = ControlSignal.constant(times, const)
        traj = simulate_controlled(config.params, config.x0, ctrl, config.grid)
        baselines[const] = total_cost(traj, ctrl, config.W)

    t_s = sol.switching_time()
    I = sol.state_traj.states[:, 1]
    data = {
        "label": scenario.label,
        "W": config.W,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "J": sol.cost,
        "J_u0": baselines[0.0],
        "J_u1": baselines[1.0],
        "t_s": t_s,
        "u_terminal": float(sol.control.values[-1]),
        "I_terminal": float(I[-1]),
        "I_at_88": float(np.interp(88.0, times, I)) if times[-1] >= 88.0 else None,
    }
    lines = [
        f"sweep {'converged' if sol.converged else 'DID NOT CONVERGE'} after {sol.iterations} iterations",
        "t_s = none (u never reaches 1)" if t_s is None else f"t_s = {t_s:g} days",
        f"u(T) = {data['u_terminal']:.6g}",
        f"I(T) = {data['I_terminal']:.4f}",
        f"J = {sol.cost:.10g} (u=0: {baselines[0.0]:.10g}, u=1: {baselines[1.0]:.10g})",
    ]
    code = EXIT_OK
    if not sol.converged:
        last = sol.history[-1][1] if sol.history else float("nan")
        lines.append(f"NotConverged: last control change {last:.3e} > tolerance {config.sweep_tolerance:g}")
        code = EXIT_DOMAIN
    return CommandOutcome(code, artifacts, lines, data)


def cmd_compare(args) -> CommandOutcome:
    scenario = _load(args)
    obs = load_observations(resolve_scenario(args.observations))
    grid = scenario.horizon
    if obs.times[-1] > grid.t_final or obs.times[0] < grid.t0:
        raise ValidationError("t_final", f"horizon [{grid.t0:g}, {grid.t_final:g}] does not cover "
                                         f"observations up to day {obs.times[-1]:g}")
    p = scenario.params
    traj = integrate_forward(lambda t, x: uncontrolled_rhs(x, p), scenario.initial_state, grid,
                             clamp_nonnegative=True)
    model_I = np.interp(obs.times, traj.times, traj.states[:, 1])
    resid = model_I - obs.infectious_counts
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    max_dev = float(np.max(np.abs(resid)))
    out = _out_dir(args, scenario)
    table = out / "comparison.csv"
    write_table(table, ["day", "observed", "model"],
                [(float(t), float(o), float(m)) for t, o, m in zip(obs.times, obs.infectious_counts, model_I)])
    overlay = out / "overlay.svg"
    render_plot([Series("model", traj.times, traj.states[:, 1]),
                 Series("observed", obs.times, obs.infectious_counts, markers=True, dashed=True)],
                overlay, title=f"{scenario.label}: infectious, model vs observed", ylabel="I")
    data = {"label": scenario.label, "rmse": rmse, "max_abs_deviation": max_dev, "n_observations": int(obs.times.size)}
    lines = [f"RMSE = {rmse:.6g}", f"max |model - observed| = {max_dev:.6g}",
             f"compared {obs.times.size} observations"]
    return CommandOutcome(EXIT_OK, [str(table), str(overlay)], lines, data)


def cmd_sweep(args) -> CommandOutcome:
    name = "Lambda" if args.param == "lambda" else args.param
    if name not in PARAM_NAMES:
        raise UsageError(f"unknown parameter {args.param!r}; choose from {', '.join(PARAM_NAMES)}")
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    scenario = _load(args)
    values = np.linspace(args.start, args.stop, args.steps)
    rows = []
    for value in values:
        try:
            p = scenario.params.replace(**{name: float(value)})
        except ModelError as exc:
            raise ValidationError(args.param, str(exc)) from None
        r0 = basic_reproduction_number(p)
        rows.append((float(value), r0, endemic_equilibrium(p) is not None, dfe_stability(p).classification))
    out = _out_dir(args, scenario)
    path = out / f"sweep_{name}.csv"
    write_table(path, [name, "R0", "endemic_exists", "dfe_stability"], rows)
    crossings = [rows[i][0] for i in range(1, len(rows)) if rows[i][2] != rows[i - 1][2]]
    data = {"label": scenario.label, "param": name,
            "rows": [dict(zip(("value", "R0", "endemic_exists", "dfe_stability"), r)) for r in rows]}
    lines = [f"swept {name} over [{args.start:g}, {args.stop:g}] in {len(rows)} points",
             f"R0 range [{min(r[1] for r in rows):.6g}, {max(r[1] for r in rows):.6g}]",
             "endemic flag flips near " + (", ".join(f"{c:g}" for c in crossings) if crossings else "(no flip)")]
    return CommandOutcome(EXIT_OK, [str(path)], lines, data)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default ./out/<label>/)")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="print a JSON report")
    common.add_argument("--step", type=float, default=argparse.SUPPRESS, help="integration step in days")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress summary text")

    parser = argparse.ArgumentParser(prog="siqrb", parents=[common],
                                     description="SIQRB cholera model analysis and optimal quarantine control.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="R0, equilibria and stability")
    p.add_argument("scenario")
    p.add_argument("--bifurcation", action="store_true", help="also report center-manifold coefficients")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", parents=[common], help="integrate the model over the horizon")
    p.add_argument("scenario")
    p.add_argument("--control-constant", type=float, default=None, metavar="U")
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--plot", action="store_true", help="write one SVG per compartment")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", parents=[common], help="solve the optimal quarantine problem")
    p.add_argument("scenario")
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", parents=[common], help="compare simulated I(t) with observations")
    p.add_argument("scenario")
    p.add_argument("observations")
    p.add_argument("--t-final", type=float, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", parents=[common], help="R0 and threshold behaviour over a parameter range")
    p.add_argument("scenario")
    p.add_argument("--param", required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def run(argv: list[str] | None = None) -> CommandOutcome:
    """Parse ``argv`` and execute the command without printing."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return CommandOutcome(int(exc.code or 0))
    for name, default in (("out", None), ("json", False), ("step", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        if args.step is not None and not args.step > 0:
            raise UsageError("--step must be > 0")
        outcome = args.func(args)
    except UsageError as exc:
        return CommandOutcome(EXIT_USAGE, summary=[f"usage error: {exc}"])
    except (ParseError, ValidationError, ModelError, NonMonotoneTime) as exc:
        return CommandOutcome(EXIT_DOMAIN, summary=[f"error: {exc}"])
    except (IntegrationError, IoError, ArithmeticError) as exc:
        return CommandOutcome(EXIT_DOMAIN, summary=[f"error: {type(exc).__name__}: {exc}"])
    outcome.data["_json"] = args.json
    outcome.data["_quiet"] = args.quiet
    return outcome


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(type(o).__name__)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    outcome = run(argv)
    as_json = outcome.data.pop("_json", False)
    quiet = outcome.data.pop("_quiet", False)
    if outcome.exit_code != EXIT_OK and not outcome.data:
        for line in outcome.summary:
            print(line, file=sys.stderr)
        return outcome.exit_code
    if as_json:
        report = {**outcome.data, "exit_code": outcome.exit_code, "artifacts": outcome.artifacts,
                  "summary": outcome.summary}
        print(json.dumps(report, indent=2, default=_json_default))
    elif not quiet:
        for line in outcome.summary:
            print(line)
        for path in outcome.artifacts:
            print(f"wrote {path}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
