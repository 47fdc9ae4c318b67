"""Pseudo-orbits and the shadowing initial-condition search.

An approximate trajectory whose error against the reference stays
within delta is a delta-pseudo-orbit of its sampling sequence. The
shadowing question runs the other way: given an approximate orbit and a
tolerance epsilon, find an initial condition for the true equation
whose solution stays epsilon-close to the orbit everywhere. The search
here varies only the scalar initial condition, scanning a symmetric box
around x(t_0) and refining the best bracket by golden section. phi is
not unimodal in general, so success is certified only by re-evaluating
the achieved error, never by the search trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .certificates import ErrorCertificate
from .errors import ConfigError, DomainMismatch
from .integrate import PerturbationSpec, Trajectory, error_trajectory, integrate_reference
from .problems import OdeProblem
from .sampling import SamplingSequence, class_membership

SCAN_POINTS = 33
REFINE_TOL = 1e-10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PseudoOrbit:
    """Sampling-point snapshot of an approximate trajectory.

    samples holds the post-jump state at every sampling point; delta is
    the certified error level of the generating run.
    """

    sampling: SamplingSequence
    samples: np.ndarray
    delta: float
    perturbed: bool = False
    source: Optional[Trajectory] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if len(samples) != self.sampling.count + 1:
            raise ConfigError("need one sample per sampling point")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")

    @classmethod
    def from_trajectory(cls, traj: Trajectory, delta: float,
                        perturbed: bool = False) -> "PseudoOrbit":
        return cls(sampling=SamplingSequence(points=traj.points.copy()),
                   samples=traj.sample_post.copy(), delta=delta,
                   perturbed=perturbed, source=traj)

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,t_i,x_i\n")
            for i, (t, x) in enumerate(zip(self.sampling.points, self.samples)):
                fh.write(f"{i},{float(t)!r},{float(x)!r}\n")


def is_pseudo_orbit(approx: Trajectory, reference: Trajectory,
                    delta: float) -> bool:
    """True when the measured error never exceeds delta.

    Both trajectories must share the sampling sequence and fine grid;
    the comparison includes the post-jump sampling values.
    """
    err = error_trajectory(reference, approx)
    return bool(err.max_abs <= delta)


def pseudo_orbit_class(orbits, J: int, h: float, delta: float) -> list:
    """Members whose sampling lies in the (J, h) class and whose
    certified level is within delta."""
    return [o for o in orbits
            if class_membership(o.sampling, J, h) and o.delta <= delta]


@dataclass(frozen=True)
class ShadowResult:
    found: bool
    y0_star: float
    achieved_error: float
    epsilon: float
    evaluations: int

    def __post_init__(self):
        if self.found and not self.achieved_error <= self.epsilon:
            raise ValueError("found requires achieved_error <= epsilon")

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "y0_star": self.y0_star,
            "achieved_error": self.achieved_error,
            "epsilon": self.epsilon,
            "evaluations": self.evaluations,
        }


def shadowing_search(problem: OdeProblem, approx: Trajectory, epsilon: float,
                     search_halfwidth: float, budget_evals: int = 200,
                     perturbation: Optional[PerturbationSpec] = None,
                     substeps_per_unit: int = 100_000) -> ShadowResult:
    """Minimize phi(y0) = max_t |y(t; y0) - x(t)| over a box around x(t_0).

    33-point coarse scan, then golden-section refinement of the best
    bracket down to 1e-10 in y0, every evaluation a full reference run
    against the fixed approximate trajectory. Deterministic; ties break
    toward the smaller initial condition. If the evaluation budget runs
    out the best candidate so far is returned with found False.
    """
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    if not search_halfwidth >= 0:
        raise ConfigError("search_halfwidth must be nonnegative")
    lam = perturbation.lam if perturbation is not None else None
    seq = SamplingSequence(points=approx.points.copy())

    evals = 0

    def phi(y0: float) -> float:
        nonlocal evals
        evals += 1
        ref = integrate_reference(problem, seq, y0, perturbation_lambda=lam,
                                  substeps_per_unit=substeps_per_unit)
        return error_trajectory(ref, approx).max_abs

    center = float(approx.sample_post[0])
    if search_halfwidth == 0:
        val = phi(center)
        return ShadowResult(found=bool(val <= epsilon), y0_star=center,
                            achieved_error=val, epsilon=epsilon,
                            evaluations=evals)

    grid = np.linspace(center - search_halfwidth, center + search_halfwidth,
                       SCAN_POINTS)
    best_val, best_y = math.inf, center
    best_idx = 0
    for idx, y0 in enumerate(grid):
        if evals >= budget_evals:
            return ShadowResult(found=False, y0_star=best_y,
                                achieved_error=best_val, epsilon=epsilon,
                                evaluations=evals)
        val = phi(float(y0))
        if val < best_val:
            best_val, best_y, best_idx = val, float(y0), idx

    a = float(grid[max(best_idx - 1, 0)])
    b = float(grid[min(best_idx + 1, SCAN_POINTS - 1)])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = fd = None
    while b - a > REFINE_TOL:
        if evals >= budget_evals:
            return ShadowResult(found=False, y0_star=best_y,
                                achieved_error=best_val, epsilon=epsilon,
                                evaluations=evals)
        if fc is None:
            fc = phi(c)
            if fc < best_val or (fc == best_val and c < best_y):
                best_val, best_y = fc, c
            continue
        if fd is None:
            fd = phi(d)
            if fd < best_val or (fd == best_val and d < best_y):
                best_val, best_y = fd, d
            continue
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = None
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = None

    return ShadowResult(found=bool(best_val <= epsilon), y0_star=best_y,
                        achieved_error=best_val, epsilon=epsilon,
                        evaluations=evals)


@dataclass(frozen=True)
class ShadowConstraintReport:
    """Clause-by-clause result of the a-priori shadowing conditions.

    Truthy exactly when every clause holds. limits records the numeric
    threshold each clause compared against.
    """

    epsilon: float
    e0_bound: float
    total_impulse: float
    clauses: dict = dc_field(default_factory=dict)
    limits: dict = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.clauses.values())

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "e0_bound": self.e0_bound,
            "total_impulse": self.total_impulse,
            "clauses": dict(self.clauses),
            "limits": dict(self.limits),
            "passed": self.passed,
        }


def verify_shadow_constraints(cert: ErrorCertificate, epsilon: float,
                              e0: float) -> ShadowConstraintReport:
    """Check the initial-error conditions under which a shadowing
    initial condition is guaranteed to exist at level epsilon.

    Clauses: the total impulse mass stays below epsilon; |e0| fits both
    the per-point margin epsilon - rho - sum(gbar_i) and the uniform
    margin epsilon - rho - J*gbar; and when a continuous rate is
    present, |e0| fits the rate-cap margin ((1 - S)/S) * gbar with
    S = sum h_i lambda_i. Each comparison carries 1e-12 slack.
    """
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    slack = 1e-12
    e0_abs = abs(float(e0))
    gbars = [float(g) for g in cert.inputs.get("gbar_list", [])]
    sum_g = float(sum(gbars))
    gbar = max(gbars) if gbars else 0.0
    J = cert.J

    hs = cert.inputs.get("h_list")
    lams = cert.inputs.get("lambda_list")
    if hs and lams:
        S = float(sum(hi * li for hi, li in zip(hs, lams)))
    else:
        S = 0.0

    clauses = {"certificate_feasible": bool(cert.feasible)}
    limits = {}

    clauses["total_impulse_below_epsilon"] = sum_g < epsilon
    limits["total_impulse_below_epsilon"] = epsilon

    margin_pp = epsilon - cert.rho - sum_g
    clauses["initial_error_per_point"] = e0_abs <= margin_pp + slack
    limits["initial_error_per_point"] = margin_pp

    margin_u = epsilon - cert.rho - J * gbar
    clauses["initial_error_uniform"] = e0_abs <= margin_u + slack
    limits["initial_error_uniform"] = margin_u

    if S > 0.0:
        margin_rate = ((1.0 - S) / S) * gbar if S < 1.0 else 0.0
        clauses["initial_error_rate_cap"] = e0_abs <= margin_rate + slack
        limits["initial_error_rate_cap"] = margin_rate
    else:
        clauses["initial_error_rate_cap"] = True
        limits["initial_error_rate_cap"] = math.inf

    return ShadowConstraintReport(epsilon=epsilon, e0_bound=e0_abs,
                                  total_impulse=sum_g, clauses=clauses,
                                  limits=limits)
