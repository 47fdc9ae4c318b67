"""Experiment orchestration: plan, run, certify, shadow, sweep.

A single ExperimentConfig fixes the problem, the truncation order, the
deviation budget, the sampling mode and any perturbation. Planning
resolves the budget into a concrete sampling sequence; running
integrates both equations on it, measures the error and pairs it with
the matching a-priori certificate. Reports are plain dicts of
primitives, deterministic for a fixed config: no timestamps, no
environment echoes, stable key order left to the JSON writer.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .certificates import (
    ErrorCertificate,
    MikTable,
    certify_continuous,
    certify_impulsive,
    certify_unperturbed,
)
from .constants import BoundConstants, estimate_constants
from .errors import ConfigError, InfeasibleBudget
from .fields import LAMBDA_ZERO, make_lambda
from .integrate import (
    NO_PERTURBATION,
    PerturbationSpec,
    Trajectory,
    error_trajectory,
    integrate_reference,
    integrate_truncated,
    segment_deviation_probe,
)
from .problems import OdeProblem, problem_from_config
from .sampling import (
    SamplingSequence,
    StepBudget,
    aggregate_alt_form,
    build_sampling,
    closed_form_h_bound,
    compute_aggregate,
)
from .shadowing import ShadowResult, shadowing_search, verify_shadow_constraints

MAX_PLAN_ROUNDS = 60

CONSTANTS_NOTE = ("growth constants come from grid-sampled sup norms and "
                  "are heuristic, not certified")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved, validated inputs for one experiment."""

    problem: OdeProblem
    ell: int
    rho: float
    rho_x: Optional[float] = None
    sampling_mode: str = "auto"
    uniform_h: Optional[float] = None
    explicit_points: Optional[tuple] = None
    perturbation: PerturbationSpec = NO_PERTURBATION
    x0: Optional[float] = None
    epsilon: Optional[float] = None
    search_halfwidth: float = 0.1
    budget_evals: int = 120
    substeps_per_unit: int = 100_000
    constants_grid: int = 101
    max_steps: int = 50_000
    rng_seed: int = 0
    sweep: Optional[dict] = None

    def __post_init__(self):
        if self.ell < 0:
            raise ConfigError("truncation order must be nonnegative")
        if self.ell > self.problem.smoothness_order:
            raise ConfigError(
                f"truncation order {self.ell} exceeds the declared smoothness "
                f"order {self.problem.smoothness_order}")
        if not 0.0 < self.rho:
            raise ConfigError("rho must be positive")
        if self.sampling_mode not in ("auto", "uniform", "explicit"):
            raise ConfigError(
                "sampling mode must be 'auto', 'uniform' or 'explicit'")
        if self.sampling_mode == "uniform" and not (self.uniform_h or 0) > 0:
            raise ConfigError("uniform sampling needs a positive step h")
        if self.sampling_mode == "explicit" and not self.explicit_points:
            raise ConfigError("explicit sampling needs a point list")
        if self.rho_x is None:
            object.__setattr__(self, "rho_x", self.rho)
        if self.x0 is None:
            object.__setattr__(self, "x0", self.problem.y0)
        if self.budget_evals < 1:
            raise ConfigError("budget_evals must be positive")

    @property
    def e0(self) -> float:
        return self.problem.y0 - self.x0

    def describe(self) -> dict:
        return {
            "problem": self.problem.describe(),
            "ell": self.ell,
            "rho": self.rho,
            "rho_x": self.rho_x,
            "sampling_mode": self.sampling_mode,
            "uniform_h": self.uniform_h,
            "explicit_points": (list(self.explicit_points)
                                if self.explicit_points else None),
            "perturbation": self.perturbation.describe(),
            "x0": self.x0,
            "epsilon": self.epsilon,
            "search_halfwidth": self.search_halfwidth,
            "budget_evals": self.budget_evals,
            "substeps_per_unit": self.substeps_per_unit,
            "constants_grid": self.constants_grid,
            "rng_seed": self.rng_seed,
        }


def _perturbation_from_config(cfg: dict) -> PerturbationSpec:
    if not cfg:
        return NO_PERTURBATION
    lam_cfg = cfg.get("lambda")
    if lam_cfg is None:
        lam = LAMBDA_ZERO
    elif isinstance(lam_cfg, dict):
        kind = lam_cfg.get("kind", "zero")
        params = {k: v for k, v in lam_cfg.items() if k != "kind"}
        lam = make_lambda(kind, **params)
    else:
        lam = make_lambda("constant", value=float(lam_cfg))
    impulses = cfg.get("impulses")
    if isinstance(impulses, list):
        impulses = np.asarray(impulses, dtype=np.float64)
    elif impulses is not None:
        impulses = float(impulses)
    return PerturbationSpec(impulses=impulses,
                            impulse_cap=float(cfg.get("impulse_cap", 0.0)),
                            lam=lam)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a plain mapping (the JSON config shape)."""
    if "problem" not in raw:
        raise ConfigError("config needs a 'problem' section")
    problem = problem_from_config(raw["problem"])
    if "ell" not in raw or "rho" not in raw:
        raise ConfigError("config needs 'ell' and 'rho'")

    sampling = raw.get("sampling", {"mode": "auto"})
    if not isinstance(sampling, dict) or "mode" not in sampling:
        raise ConfigError("the sampling section needs a 'mode'")
    mode = sampling["mode"]
    uniform_h = sampling.get("h")
    explicit = sampling.get("points")

    try:
        return ExperimentConfig(
            problem=problem,
            ell=int(raw["ell"]),
            rho=float(raw["rho"]),
            rho_x=(float(raw["rho_x"]) if "rho_x" in raw else None),
            sampling_mode=mode,
            uniform_h=(float(uniform_h) if uniform_h is not None else None),
            explicit_points=(tuple(float(p) for p in explicit)
                             if explicit else None),
            perturbation=_perturbation_from_config(raw.get("perturbation", {})),
            x0=(float(raw["x0"]) if "x0" in raw else None),
            epsilon=(float(raw["epsilon"]) if "epsilon" in raw else None),
            search_halfwidth=float(raw.get("search_halfwidth", 0.1)),
            budget_evals=int(raw.get("budget_evals", 120)),
            substeps_per_unit=int(raw.get("oracle", {}).get(
                "substeps_per_unit", 100_000)),
            constants_grid=int(raw.get("constants_grid", 101)),
            max_steps=int(raw.get("max_steps", 50_000)),
            rng_seed=int(raw.get("rng_seed", 0)),
            sweep=raw.get("sweep"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc


@dataclass
class ExperimentPlan:
    constants: BoundConstants
    budget: StepBudget
    sampling: SamplingSequence
    rounds: int


def plan_experiment(config: ExperimentConfig) -> ExperimentPlan:
    """Resolve the budget into a concrete sampling sequence.

    The closed-form step bound depends on J while J follows from the
    bound, so auto mode iterates: assume J, bound the step, build the
    sequence, and accept once the built gap count fits the assumption.
    The bound shrinks as J grows, so the assumed J ratchets upward and
    either stabilizes or exhausts the round limit.
    """
    problem = config.problem
    k_max = min(config.ell + 1, problem.smoothness_order)
    constants = estimate_constants(problem, k_max,
                                   grid_density=config.constants_grid)
    A_true = compute_aggregate(constants, config.ell, mode="true")

    if config.sampling_mode == "uniform":
        span = problem.window
        count = max(1, int(round(span / config.uniform_h)))
        seq = SamplingSequence.uniform(problem.t0, problem.t_end, count)
        bound = closed_form_h_bound(A_true, config.ell, config.rho, seq.count)
        budget = StepBudget(rho=config.rho, rho_x=config.rho_x,
                            ell=config.ell, A_value=A_true,
                            closed_form_bound=bound)
        return ExperimentPlan(constants, budget, seq, rounds=0)

    if config.sampling_mode == "explicit":
        seq = SamplingSequence.from_points(config.explicit_points)
        bound = closed_form_h_bound(A_true, config.ell, config.rho, seq.count)
        budget = StepBudget(rho=config.rho, rho_x=config.rho_x,
                            ell=config.ell, A_value=A_true,
                            closed_form_bound=bound)
        return ExperimentPlan(constants, budget, seq, rounds=0)

    J_assumed = 1
    for round_no in range(1, MAX_PLAN_ROUNDS + 1):
        bound = closed_form_h_bound(A_true, config.ell, config.rho, J_assumed)
        budget = StepBudget(rho=config.rho, rho_x=config.rho_x,
                            ell=config.ell, A_value=A_true,
                            closed_form_bound=bound)
        probe = segment_deviation_probe(
            problem, config.ell, config.x0, y0=problem.y0,
            perturbation=config.perturbation,
            substeps_per_unit=config.substeps_per_unit)
        seq = build_sampling(problem, budget, probe,
                             max_steps=config.max_steps)
        if seq.count <= J_assumed:
            return ExperimentPlan(constants, budget, seq, rounds=round_no)
        J_assumed = seq.count
    raise InfeasibleBudget(
        f"step budget did not stabilize within {MAX_PLAN_ROUNDS} rounds "
        f"(last J = {J_assumed})")


def _certificate_for(config: ExperimentConfig, constants: BoundConstants,
                     seq: SamplingSequence) -> ErrorCertificate:
    J = seq.count
    h = seq.envelope
    pert = config.perturbation
    gbars = pert.caps_list(J)
    if pert.has_lambda:
        lam_caps = pert.lambda_caps(seq)
        return certify_continuous(constants, config.ell, config.rho, J,
                                  list(seq.gaps), list(lam_caps), gbars,
                                  config.e0)
    if pert.has_impulses or pert.impulse_cap > 0:
        return certify_impulsive(constants, config.ell, config.rho, J, h,
                                 gbars, config.e0)
    return certify_unperturbed(constants, config.ell, config.rho, J, h,
                               config.e0)


@dataclass
class RunResult:
    config: ExperimentConfig
    plan: ExperimentPlan
    truncated: Trajectory
    reference: Trajectory
    error: Trajectory
    certificate: ErrorCertificate
    report: dict


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Plan, integrate both equations, measure, certify, report."""
    problem = config.problem
    plan = plan_experiment(config)
    seq = plan.sampling

    truncated = integrate_truncated(problem, seq, config.ell, config.x0,
                                    perturbation=config.perturbation)
    reference = integrate_reference(problem, seq, problem.y0,
                                    perturbation_lambda=config.perturbation.lam,
                                    substeps_per_unit=config.substeps_per_unit)
    err = error_trajectory(reference, truncated)
    cert = _certificate_for(config, plan.constants, seq)

    mik = MikTable.from_constants(plan.constants, seq.count,
                                  min(config.ell + 1,
                                      problem.smoothness_order))
    aggregates = {
        "approx": compute_aggregate(plan.constants, config.ell, "approx"),
        "true": compute_aggregate(plan.constants, config.ell, "true"),
        "approx_zero_extra": compute_aggregate(plan.constants, config.ell,
                                               "approx_zeroK1"),
        "alt_form": aggregate_alt_form(plan.constants, config.ell),
    }
    report = {
        "config": config.describe(),
        "constants": {**plan.constants.describe(), "heuristic": True},
        "aggregates": aggregates,
        "budget": {
            "rho": config.rho,
            "rho_x": config.rho_x,
            "A_value": plan.budget.A_value,
            "closed_form_h_bound": plan.budget.closed_form_bound,
            "plan_rounds": plan.rounds,
            "exit_thresholds": [float(v) for v in plan.budget.exit_thresholds],
        },
        "sampling": {
            "count": seq.count,
            "max_gap": seq.envelope,
            "points": [float(p) for p in seq.points],
        },
        "oracle": {
            "substeps_per_unit": config.substeps_per_unit,
            "rel_err": reference.oracle_rel_err,
            "flagged": reference.oracle_flagged,
        },
        "stats": {
            "max_abs_error": err.max_abs,
            "max_interval_dev": err.max_interval_dev,
            "max_dev_from_start": err.max_dev_from_start,
            "max_sample_step": err.max_sample_step,
            "segment_sup_dev_truncated":
                [float(v) for v in truncated.segment_sup_deviation()],
            "segment_sup_dev_reference":
                [float(v) for v in reference.segment_sup_deviation()],
        },
        "certificate": cert.with_measurements(
            err.max_abs, max_interval_dev=err.max_interval_dev,
            max_dev_from_start=err.max_dev_from_start),
        "mik_table": {
            "terminal_bound": mik.terminal_bound(),
            "within_chain": mik.check(),
        },
        "notes": [CONSTANTS_NOTE],
    }
    return RunResult(config=config, plan=plan, truncated=truncated,
                     reference=reference, error=err, certificate=cert,
                     report=report)


@dataclass
class ShadowOutcome:
    run: RunResult
    result: ShadowResult
    constraints_report: dict
    report: dict


def shadow_experiment(config: ExperimentConfig,
                      run: Optional[RunResult] = None) -> ShadowOutcome:
    """Search for a shadowing initial condition for a (possibly fresh) run.

    The threshold defaults to the certified level |e0| + rho when the
    config leaves epsilon unset.
    """
    if run is None:
        run = run_experiment(config)
    epsilon = config.epsilon
    if epsilon is None:
        epsilon = abs(config.e0) + config.rho
    result = shadowing_search(config.problem, run.truncated, epsilon,
                              config.search_halfwidth,
                              budget_evals=config.budget_evals,
                              perturbation=config.perturbation,
                              substeps_per_unit=config.substeps_per_unit)
    constraints = verify_shadow_constraints(run.certificate, epsilon,
                                            config.e0)
    report = {
        "run": run.report,
        "shadow": result.to_dict(),
        "constraints": constraints.to_dict(),
    }
    return ShadowOutcome(run=run, result=result,
                         constraints_report=constraints.to_dict(),
                         report=report)


SWEEP_AXES = ("ell", "rho", "h", "gbar", "lambda")


def _sweep_points(sweep: dict) -> list[dict]:
    axes = [(k, list(sweep[k])) for k in SWEEP_AXES if k in sweep]
    unknown = set(sweep) - set(SWEEP_AXES)
    if unknown:
        raise ConfigError(f"unknown sweep axes {sorted(unknown)}")
    if not axes:
        raise ConfigError("sweep section has no axes")
    points = [{}]
    for name, values in axes:
        points = [{**p, name: v} for p in points for v in values]
    return points


def _apply_sweep_point(config: ExperimentConfig, point: dict) -> ExperimentConfig:
    updates: dict = {"sweep": None}
    if "ell" in point:
        updates["ell"] = int(point["ell"])
    if "rho" in point:
        updates["rho"] = float(point["rho"])
        updates["rho_x"] = None
    if "h" in point:
        if point["h"] is None:
            updates["sampling_mode"] = "auto"
            updates["uniform_h"] = None
        else:
            updates["sampling_mode"] = "uniform"
            updates["uniform_h"] = float(point["h"])
    pert = config.perturbation
    if "gbar" in point or "lambda" in point:
        gbar = float(point.get("gbar", pert.impulse_cap or 0.0))
        if "lambda" in point:
            lam = make_lambda("constant", value=float(point["lambda"])) \
                if float(point["lambda"]) != 0.0 else LAMBDA_ZERO
        else:
            lam = pert.lam
        impulses = gbar if "gbar" in point else pert.impulses
        updates["perturbation"] = PerturbationSpec(
            impulses=impulses, impulse_cap=gbar, lam=lam)
    return dataclasses.replace(config, **updates)


def _sweep_row(index: int, point: dict, config: ExperimentConfig) -> dict:
    row = {
        "index": index,
        "ell": config.ell,
        "rho": config.rho,
        "h_requested": point.get("h"),
        "gbar": point.get("gbar", 0.0),
        "lambda": point.get("lambda", 0.0),
    }
    try:
        outcome = shadow_experiment(config)
    except Exception as exc:  # noqa: BLE001 - rows must not kill the sweep
        row.update(status=type(exc).__name__, J=None, h=None,
                   epsilon=None, measured_max_abs=None, feasible=False,
                   sound=None, shadow_found=None, shadow_achieved=None,
                   shadow_y0=None)
        return row
    run = outcome.run
    cert = run.certificate
    row.update(
        status="ok",
        J=run.plan.sampling.count,
        h=run.plan.sampling.envelope,
        epsilon=cert.epsilon,
        measured_max_abs=run.error.max_abs,
        feasible=cert.feasible,
        sound=bool(run.error.max_abs <= cert.epsilon),
        shadow_found=outcome.result.found,
        shadow_achieved=outcome.result.achieved_error,
        shadow_y0=outcome.result.y0_star,
    )
    return row


def sweep_experiment(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Run the cartesian sweep grid, one row per point, ordered by index.

    Rows run concurrently up to the worker count; assembly is by index,
    so the output order never depends on scheduling.
    """
    if not config.sweep:
        raise ConfigError("config has no sweep section")
    points = _sweep_points(config.sweep)
    configs = [_apply_sweep_point(config, p) for p in points]
    if workers <= 1:
        return [_sweep_row(i, p, c)
                for i, (p, c) in enumerate(zip(points, configs))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_row, i, p, c)
                   for i, (p, c) in enumerate(zip(points, configs))]
        return [f.result() for f in futures]


SWEEP_COLUMNS = ("index", "ell", "rho", "h_requested", "gbar", "lambda",
                 "status", "J", "h", "epsilon", "measured_max_abs",
                 "feasible", "sound", "shadow_found", "shadow_achieved",
                 "shadow_y0")


def sweep_rows_to_csv(rows: list[dict], path: str) -> None:
    def cell(v) -> str:
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(cell(row.get(c)) for c in SWEEP_COLUMNS) + "\n")
