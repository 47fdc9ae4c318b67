"""Shared fixtures: battery problems, cached battery runs, warmup.

The acceptance tests register one PASS/FAIL line per criterion through
record_criterion; a terminal-summary hook replays them at the end of the
run so the verdicts are visible even with captured stdout.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from taylorcert import (
    ExperimentConfig,
    OdeProblem,
    PerturbationSpec,
    make_field,
    make_lambda,
    run_experiment,
)

_ACCEPTANCE_LINES = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"[criterion] {name}: {status}"
    if detail:
        line += f"  ({detail})"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def battery_problems() -> list:
    """Four smooth scalar problems spanning the built-in fields.

    Windows are short enough that the closed-form step bound admits the
    whole window in one gap for most (ell, rho) combinations.
    """
    return [
        ("affine_decay", OdeProblem(
            field=make_field("affine", a=-1.0, b=0.0), y0=0.02,
            t0=0.0, t_end=0.04, theta=0.5, smoothness_order=3)),
        ("sine_drift", OdeProblem(
            field=make_field("sine", amplitude=0.1), y0=0.05,
            t0=0.0, t_end=0.3, theta=0.5, smoothness_order=5)),
        ("damped_driven", OdeProblem(
            field=make_field("damped_driven"), y0=0.0,
            t0=0.0, t_end=0.15, theta=0.6, smoothness_order=3)),
        ("logistic_low", OdeProblem(
            field=make_field("logistic"), y0=0.05,
            t0=0.0, t_end=0.04, theta=0.3, smoothness_order=3)),
    ]


BATTERY_ELLS = (0, 1, 2)
BATTERY_RHOS = (0.1, 0.3, 0.5)


@pytest.fixture(scope="session", autouse=True)
def _warmup():
    # One tiny end-to-end run so kernel compilation happens outside any
    # timed assertion.
    problem = OdeProblem(field=make_field("logistic"), y0=0.5,
                         t0=0.0, t_end=0.02, theta=0.3, smoothness_order=3)
    run_experiment(ExperimentConfig(problem=problem, ell=1, rho=0.3))
    run_experiment(ExperimentConfig(
        problem=problem, ell=1, rho=0.3,
        perturbation=PerturbationSpec(impulses=0.001, impulse_cap=0.001)))
    run_experiment(ExperimentConfig(
        problem=problem, ell=1, rho=0.3,
        perturbation=PerturbationSpec(lam=make_lambda("constant", value=0.1))))


def _run_battery(perturbation, x0_shift=0.0):
    rows = []
    t0 = time.perf_counter()
    for name, problem in battery_problems():
        for ell in BATTERY_ELLS:
            for rho in BATTERY_RHOS:
                cfg = ExperimentConfig(
                    problem=problem, ell=ell, rho=rho,
                    perturbation=perturbation,
                    x0=problem.y0 + x0_shift)
                rows.append({
                    "name": name, "ell": ell, "rho": rho,
                    "run": run_experiment(cfg),
                })
    elapsed = time.perf_counter() - t0
    return rows, elapsed


@pytest.fixture(scope="session")
def battery_unperturbed(_warmup):
    """Criterion 3 battery: 4 problems x 3 orders x 3 budgets, e0 = 0."""
    from taylorcert import NO_PERTURBATION
    return _run_battery(NO_PERTURBATION)


@pytest.fixture(scope="session")
def battery_impulsive(_warmup):
    pert = PerturbationSpec(impulses=0.01, impulse_cap=0.01)
    return _run_battery(pert)


@pytest.fixture(scope="session")
def battery_continuous(_warmup):
    pert = PerturbationSpec(lam=make_lambda("constant", value=0.5))
    return _run_battery(pert)


@pytest.fixture(scope="session")
def battery_continuous_zero(_warmup):
    pert = PerturbationSpec(lam=make_lambda("constant", value=0.0))
    return _run_battery(pert)


@pytest.fixture(scope="session")
def battery_shifted(_warmup):
    """Same battery with the surrogate started 0.02 above the true state."""
    from taylorcert import NO_PERTURBATION
    return _run_battery(NO_PERTURBATION, x0_shift=0.02)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260819)
