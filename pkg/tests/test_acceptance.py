"""Acceptance gate: one check per headline criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py`` (the PASS/FAIL lines are printed in
the terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
import tempfile
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from siqrb.analysis import (
    basic_reproduction_number,
    bifurcation_coefficients,
    endemic_equilibrium,
    jacobian_at,
)
from siqrb.cli import resolve_scenario, run
from siqrb.data_io import load_scenario, read_trajectory, write_trajectory
from siqrb.integrator import TimeGrid, integrate_forward
from siqrb.model import ControlSignal, ModelParams, uncontrolled_rhs, validate_params
from siqrb.ocp import cost_gradient_check, evaluate_cost, forward_backward_sweep

RESULTS: list[str] = []

ESTAR = np.array([2684.3930, 27.2540, 6.8093, 1217.7101, 825.8793])
SIB_ESTAR = np.array([620.2829, 32.2234, 976.4658])


def _record(name: str, checks: list[tuple[str, bool, str]]) -> bool:
    ok = all(passed for _, passed, _ in checks)
    RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {name}")
    for label, passed, detail in checks:
        RESULTS.append(f"    {'pass' if passed else 'FAIL'}  {label}: {detail}")
    return ok


def _scenario(name):
    return load_scenario(resolve_scenario(name))


def criterion_1():
    start = time.perf_counter()
    r0 = run(["analyze", "haiti_siqrb.scn"]).data["R0"]
    r0_sib = run(["analyze", "haiti_sib.scn"]).data["R0"]
    elapsed = time.perf_counter() - start
    return [
        ("R0 Table 1 = 8.2550 +-0.5%", abs(r0 / 8.2550 - 1) <= 5e-3, f"{r0:.6f}"),
        ("R0 SIB = 35.7306 +-0.5%", abs(r0_sib / 35.7306 - 1) <= 5e-3, f"{r0_sib:.6f}"),
        ("runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f} s"),
    ]


def criterion_2():
    start = time.perf_counter()
    ee = endemic_equilibrium(_scenario("haiti_siqrb.scn").params)
    sib = endemic_equilibrium(_scenario("haiti_sib.scn").params)
    elapsed = time.perf_counter() - start
    rel = np.max(np.abs(np.array(ee.state) / ESTAR - 1))
    sib_state = np.array([sib.state.S, sib.state.I, sib.state.B])
    rel_sib = np.max(np.abs(sib_state / SIB_ESTAR - 1))
    return [
        ("E* within 0.1% per component", rel <= 1e-3, f"max rel dev {rel:.2e}"),
        ("E* residual < 1e-8", ee.residual_norm < 1e-8, f"{ee.residual_norm:.2e}"),
        ("SIB E* within 0.1%", rel_sib <= 1e-3, f"max rel dev {rel_sib:.2e}"),
        ("runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f} s"),
    ]


def criterion_3():
    start = time.perf_counter()
    bc = bifurcation_coefficients(_scenario("haiti_siqrb.scn").params)
    elapsed = time.perf_counter() - start
    return [
        ("a < 0", bc.a < 0, f"a = {bc.a:.6g}"),
        ("b > 0", bc.b > 0, f"b = {bc.b:.6g}"),
        ("runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f} s"),
    ]


@lru_cache(maxsize=1)
def _ocp_run():
    scenario = _scenario("haiti_siqrb.scn")
    config = scenario.ocp_config()
    start = time.perf_counter()
    sol = forward_backward_sweep(config)
    j0 = evaluate_cost(config, ControlSignal.constant(config.grid.times, 0.0))
    j1 = evaluate_cost(config, ControlSignal.constant(config.grid.times, 1.0))
    return config, sol, j0, j1, time.perf_counter() - start


def criterion_4():
    config, sol, j0, j1, elapsed = _ocp_run()
    t, u = sol.times, sol.control.values
    I = sol.state_traj.states[:, 1]
    t_s = sol.switching_time()
    tail = u[t > t_s] if t_s is not None else u
    I88 = float(np.interp(88.0, t, I))
    return [
        ("grid step h = 0.05", config.grid.h == pytest.approx(0.05), f"h = {config.grid.h:g}"),
        ("sweep converged", sol.converged, f"{sol.iterations} iterations"),
        ("t_s = 87.36 +-2 d", t_s is not None and abs(t_s - 87.36) <= 2.0, f"t_s = {t_s}"),
        ("u nonincreasing on (t_s, 182]", bool(np.all(np.diff(tail) <= 1e-9)),
         f"max increase {np.max(np.diff(tail), initial=0.0):.2e}"),
        ("u(182) = 0.00159 +-50%", abs(u[-1] / 0.00159 - 1) <= 0.5, f"u(182) = {u[-1]:.6g}"),
        ("I(88) = 86 +-10%", abs(I88 / 86 - 1) <= 0.1, f"I(88) = {I88:.4f}"),
        ("I(182) = 23 +-10%", abs(I[-1] / 23 - 1) <= 0.1, f"I(182) = {I[-1]:.4f}"),
        ("J(u*) < min(J(0), J(1))", sol.cost < min(j0, j1), f"{sol.cost:.7g} vs {j0:.7g}, {j1:.7g}"),
        ("runtime < 60 s", elapsed < 60.0, f"{elapsed:.1f} s"),
    ]


def criterion_5():
    params = _scenario("haiti_siqrb.scn").params
    rng = np.random.default_rng(5)

    # positivity and invariant region
    pop, bac = params.population_bound, params.bacteria_bound
    worst_neg, worst_out = 0.0, 0.0
    for _ in range(100):
        shares = rng.dirichlet(np.ones(5))[:4]
        x0 = np.append(shares * pop * rng.uniform(), rng.uniform() * bac)
        traj = integrate_forward(lambda t, x: uncontrolled_rhs(x, params), x0, TimeGrid(0, 60, 600),
                                 clamp_nonnegative=True)
        worst_neg = max(worst_neg, traj.max_clamped, -traj.states.min())
        worst_out = max(worst_out, np.max(traj.states[:, :4].sum(axis=1) / pop - 1),
                        np.max(traj.states[:, 4] / bac - 1))
    region_ok = worst_neg <= 1e-9 and worst_out <= 1e-9

    # endemic existence iff R0 > 1
    def lu(lo, hi):
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    mismatches = 0
    for _ in range(200):
        p = validate_params(ModelParams(
            Lambda=lu(1e-2, 1e2), mu=lu(1e-6, 1e-2), beta=lu(1e-3, 5.0), kappa=lu(1e3, 1e8),
            omega=lu(1e-5, 1e-1), delta=lu(1e-4, 1.0), epsilon=lu(1e-3, 1.0),
            alpha1=lu(1e-4, 1e-1), alpha2=lu(1e-5, 1e-1), eta=lu(1e-1, 1e2), d=lu(1e-2, 2.0)))
        mismatches += (endemic_equilibrium(p) is not None) != (basic_reproduction_number(p) > 1)

    # Jacobian vs central differences
    jac_err = 0.0
    for _ in range(20):
        x = np.append(rng.uniform(1, 2e4, 4), rng.uniform(1, 1e6))
        J = jacobian_at(x, params)
        for i in range(5):
            h = 1e-6 * max(1.0, abs(x[i]))
            e = np.zeros(5)
            e[i] = h
            fd = (uncontrolled_rhs(x + e, params) - uncontrolled_rhs(x - e, params)) / (2 * h)
            nz = J[:, i] != 0
            jac_err = max(jac_err, np.max(np.abs(fd[nz] / J[nz, i] - 1), initial=0.0))

    # RK4 observed order on x' = -x
    errs = [abs(integrate_forward(lambda t, x: -x, [1.0], TimeGrid(0, 1, n)).states[-1, 0] - np.exp(-1))
            for n in (10, 20, 40)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))

    # adjoint directional derivative vs central difference on an interior control
    config, sol, _, _, _ = _ocp_run()
    times = config.grid.times

    def bump(t):
        inside = (t > 40) & (t < 60)
        return np.where(inside, np.sin(np.pi * (t - 40) / 20) ** 2, 0.0)

    grad = cost_gradient_check(config, ControlSignal.constant(times, 0.5), bump)

    J = np.array([j for j, _ in sol.history])
    increases = np.diff(J[2:]) / J[2:-1]
    return [
        ("positivity and region invariance (100 states)", region_ok,
         f"undershoot {worst_neg:.1e}, overshoot {worst_out:.1e}"),
        ("endemic exists iff R0 > 1 (200 sets)", mismatches == 0, f"{mismatches} mismatches"),
        ("Jacobian vs finite differences <= 1e-6", jac_err <= 1e-6, f"max rel err {jac_err:.1e}"),
        ("RK4 order 4.0 +-0.2", bool(np.all(np.abs(orders - 4) <= 0.2)), f"orders {np.round(orders, 3).tolist()}"),
        ("adjoint gradient vs central difference <= 1e-4", grad.relative_error <= 1e-4,
         f"rel err {grad.relative_error:.1e}"),
        ("sweep J nonincreasing after iteration 3", bool(np.all(increases <= 1e-6)),
         f"max relative increase {np.max(increases, initial=0.0):.1e}"),
    ]


def criterion_6():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        identical = True
        for k, argv in enumerate([["simulate", "haiti_siqrb.scn"],
                                  ["optimize", "haiti_siqrb.scn", "--no-plot"],
                                  ["sweep", "haiti_siqrb.scn", "--param", "beta", "--from", "0.01", "--to", "0.8",
                                   "--steps", "20"]]):
            a = run(argv + ["--out", str(tmp / f"{k}a")])
            b = run(argv + ["--out", str(tmp / f"{k}b")])
            for pa, pb in zip(a.artifacts, b.artifacts):
                if pa.endswith(".csv"):
                    identical &= Path(pa).read_bytes() == Path(pb).read_bytes()
            identical &= bool(a.artifacts) and len(a.artifacts) == len(b.artifacts)

        _, sol, _, _, _ = _ocp_run()
        path = tmp / "rt.csv"
        write_trajectory(sol.state_traj, path, control=sol.control, adjoint=sol.adjoint_traj)
        cols = read_trajectory(path)
        round_trip = (np.array_equal(cols["t"], sol.times)
                      and np.array_equal(np.column_stack([cols[c] for c in "SIQRB"]), sol.state_traj.states)
                      and np.array_equal(cols["u"], sol.control.values)
                      and np.array_equal(np.column_stack([cols[f"lambda{i}"] for i in range(1, 6)]),
                                         sol.adjoint_traj.states))
    return [
        ("repeat CLI runs give bit-identical CSVs", identical, "simulate, optimize, sweep"),
        ("trajectory CSV round-trips bit-exactly", round_trip, f"{cols['t'].size} rows x {len(cols)} columns"),
    ]


CRITERIA = [
    ("1 R0 reproduction", criterion_1),
    ("2 endemic equilibrium", criterion_2),
    ("3 bifurcation signs", criterion_3),
    ("4 OCP headline numbers", criterion_4),
    ("5 property suite", criterion_5),
    ("6 determinism and I/O", criterion_6),
]


@pytest.mark.parametrize("name, check", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(name, check):
    checks = check()
    ok = _record(f"criterion {name}", checks)
    failed = [f"{label} ({detail})" for label, passed, detail in checks if not passed]
    assert ok, "; ".join(failed)


if __name__ == "__main__":
    all_ok = True
    for name, check in CRITERIA:
        all_ok &= _record(f"criterion {name}", check())
    print("\n".join(RESULTS))
    sys.exit(0 if all_ok else 1)
