"""Admissible non-uniform sampling sequences and their step budgets.

A sampling sequence t_0 < t_1 < ... < t_J is admissible for a budget rho
when every gap h_i = t_{i+1} - t_i stays below both the closed-form bound
derived from the aggregate derivative constant and the first time either
flow drifts rho/2 away from its value at t_i. Construction is greedy and
forward: take the longest admissible step, commit, repeat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .constants import BoundConstants, k1_chain
from .errors import InfeasibleBudget, NumericalDomainError, StepCollapse

_AGGREGATE_MODES = ("approx", "true", "approx_zeroK1")


@dataclass(frozen=True)
class SamplingSequence:
    """Strictly increasing sampling points, gaps derived, never stored."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or len(pts) < 2:
            raise ValueError("a sampling sequence needs at least two points")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("sampling points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def envelope(self) -> float:
        """Largest gap, the h of the class this sequence belongs to."""
        return float(self.gaps.max())

    @property
    def count(self) -> int:
        """Number of gaps J (one less than the number of points)."""
        return len(self.points) - 1

    @property
    def t0(self) -> float:
        return float(self.points[0])

    @property
    def t_end(self) -> float:
        return float(self.points[-1])

    @classmethod
    def uniform(cls, t0: float, t_end: float, count: int) -> "SamplingSequence":
        if count < 1:
            raise ValueError("count must be at least 1")
        return cls(points=np.linspace(t0, t_end, count + 1))

    @classmethod
    def from_points(cls, points) -> "SamplingSequence":
        return cls(points=np.asarray(points, dtype=np.float64))

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,t_i,h_i\n")
            gaps = self.gaps
            for i, t in enumerate(self.points):
                h = repr(float(gaps[i])) if i < len(gaps) else ""
                fh.write(f"{i},{float(t)!r},{h}\n")


@dataclass
class StepBudget:
    """Everything needed to judge a candidate step admissible.

    exit_thresholds is filled during construction: entry i is the first
    time past t_i at which the tracked deviation reaches rho/2 (or the
    end of the probed span when it never does).
    """

    rho: float
    rho_x: float
    ell: int
    A_value: float
    closed_form_bound: float
    exit_thresholds: list = dc_field(default_factory=list)

    def __post_init__(self):
        if not (0.0 < self.rho < 2.0):
            raise InfeasibleBudget(f"rho must lie in (0, 2), got {self.rho}")
        if self.ell < 0:
            raise ValueError("ell must be nonnegative")


def compute_aggregate(constants: BoundConstants, ell: int, mode: str = "approx") -> float:
    """Aggregate derivative constant: sum of chain bounds over k!.

    mode 'approx' sums k = 0 .. ell of (K^k F0 + K1(1-K^k)/(1-K)) / k!,
    mode 'true' extends the same sum to ell + 1, and 'approx_zeroK1'
    drops the K1 part entirely.
    """
    if mode not in _AGGREGATE_MODES:
        raise ValueError(f"mode must be one of {_AGGREGATE_MODES}")
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    top = ell + 1 if mode == "true" else ell
    K, K1, F0 = constants.K, constants.K1, constants.F0
    total = 0.0
    fact = 1.0
    for k in range(top + 1):
        if k > 1:
            fact *= k
        term = (K ** k) * F0
        if mode != "approx_zeroK1":
            term += k1_chain(K, K1, k)
        total += term / fact
    return total


def aggregate_alt_form(constants: BoundConstants, ell: int) -> float:
    """Display variant with a single trailing K1 term.

    F0 * sum_{k=0..ell} K^k / k! + K1 (1 - K^{ell+1}) / (1 - K).
    Reported next to the canonical 'approx' aggregate, never used in
    budget arithmetic.
    """
    K, K1, F0 = constants.K, constants.K1, constants.F0
    total = 0.0
    fact = 1.0
    for k in range(ell + 1):
        if k > 1:
            fact *= k
        total += (K ** k) * F0 / fact
    return total + k1_chain(K, K1, ell + 1)


def _geom_sum(r: float, top: int) -> float:
    """sum_{k=0..top} r^k, with the empty sum (top < 0) equal to zero."""
    if top < 0:
        return 0.0
    if r == 1.0:
        return float(top + 1)
    return (1.0 - r ** (top + 1)) / (1.0 - r)


def deviation_inequality_h(A_value: float, ell: int, rho: float, J: int,
                           rel_tol: float = 1e-13) -> float:
    """Largest h passing the per-step accumulation inequality, by bisection.

    The inequality bounds the worst accumulated deviation over J steps of
    length h by rho/2:

        (J-1) h A S_full / (1 - h A S_prev) <= rho/2,   1 - h A S_prev > 0,

    with S_full = sum_{k=0..ell} (rho/2)^k and S_prev the same sum one
    order lower. Returns inf when no finite h violates it.
    """
    r = 0.5 * rho
    s_full = _geom_sum(r, ell)
    s_prev = _geom_sum(r, ell - 1)

    def ok(h: float) -> bool:
        bracket = 1.0 - h * A_value * s_prev
        if bracket <= 0.0:
            return False
        return (J - 1) * h * A_value * s_full <= r * bracket

    if A_value <= 0.0:
        return math.inf
    hi = 1.0
    while ok(hi):
        hi *= 2.0
        if hi > 1e100:
            return math.inf
    lo = 0.0
    while hi - lo > rel_tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def closed_form_h_bound(A_value: float, ell: int, rho: float, J: int) -> float:
    """Uniform step bound for a budget rho split over J steps.

    Returns the least of two closed forms and the numerically solved
    accumulation inequality, with r = rho/2 and G = sum_{k=0..ell} r^k:

        T1 = (1 - r) / (A * G)
        T2 = r (1 - r) / (A * (1 - r^{ell+1}) * (J - 1 + r))

    A zero aggregate imposes no constraint at all, so A_value = 0 maps to
    an infinite bound rather than an error.
    """
    if not (0.0 < rho < 2.0):
        raise InfeasibleBudget(f"rho must lie in (0, 2), got {rho}")
    if J < 1:
        raise ValueError("J must be at least 1")
    if A_value < 0.0:
        raise ValueError("A_value must be nonnegative")
    if A_value == 0.0:
        return math.inf
    r = 0.5 * rho
    g = _geom_sum(r, ell)
    t1 = (1.0 - r) / (A_value * g)
    t2 = r * (1.0 - r) / (A_value * (1.0 - r ** (ell + 1)) * (J - 1 + r))
    solved = deviation_inequality_h(A_value, ell, rho, J)
    bound = min(t1, t2, solved)
    if not bound > 0.0:
        raise InfeasibleBudget(
            f"step bound collapsed to {bound} for A={A_value}, rho={rho}, J={J}"
        )
    return bound


def first_exit(trajectory_evaluator: Callable, t_start: float, half_budget: float,
               t_max: float, scan_points: int = 10_000, tol: float = 1e-10) -> float:
    """First time past t_start at which |traj(t) - traj(t_start)| reaches half_budget.

    Scan on a fine grid, then bisect the bracketing cell down to tol.
    Returns t_max when the deviation never gets there.
    """
    if half_budget <= 0.0:
        raise ValueError("half_budget must be positive")
    if not t_max > t_start:
        raise ValueError("t_max must exceed t_start")

    base = float(trajectory_evaluator(t_start))
    ts = np.linspace(t_start, t_max, scan_points + 1)
    try:
        vals = np.asarray(trajectory_evaluator(ts), dtype=np.float64)
        if vals.shape != ts.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([float(trajectory_evaluator(t)) for t in ts])
    dev = np.abs(vals - base)
    if not np.all(np.isfinite(dev)):
        raise NumericalDomainError("trajectory evaluator produced non-finite values")

    crossing = np.nonzero(dev >= half_budget)[0]
    if len(crossing) == 0:
        return float(t_max)
    idx = int(crossing[0])
    if idx == 0:
        # Deviation already at the threshold at the starting point.
        return float(t_start)

    lo, hi = float(ts[idx - 1]), float(ts[idx])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if abs(float(trajectory_evaluator(mid)) - base) >= half_budget:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def build_sampling(problem, budget: StepBudget, integrate_segment: Callable,
                   max_steps: int = 50_000) -> SamplingSequence:
    """Greedy forward construction of an admissible sampling sequence.

    integrate_segment(t_start, t_end) must return a deviation evaluator
    for a tentative segment starting at the currently committed state,
    vanishing at t_start. Per step the gap is

        h_i = min(closed_form_bound, exit_i - t_i, t_end - t_i)

    where exit_i comes from first_exit with half budget rho/2. Steps under
    1e-12 abort with StepCollapse.
    """
    t0, t_end = problem.t0, problem.t_end
    tiny = 1e-12 * max(1.0, abs(t_end))
    points = [t0]
    thresholds: list[float] = []
    t = t0
    while t < t_end - tiny:
        if len(points) > max_steps:
            raise InfeasibleBudget(
                f"sampling sequence exceeded {max_steps} steps before reaching t_end"
            )
        remaining = t_end - t
        cand = min(budget.closed_form_bound, remaining)
        if cand < 1e-12:
            raise StepCollapse(f"candidate step {cand} below 1e-12 at t={t}")
        dev = integrate_segment(t, t + cand)
        exit_t = first_exit(dev, t, 0.5 * budget.rho, t + cand)
        thresholds.append(exit_t)
        h = min(budget.closed_form_bound, exit_t - t, remaining)
        if h < 1e-12:
            raise StepCollapse(f"admissible step {h} below 1e-12 at t={t}")
        t = t + h
        if t >= t_end - tiny:
            t = t_end
        points.append(t)
    budget.exit_thresholds = thresholds
    return SamplingSequence(points=np.array(points))


def class_membership(seq: SamplingSequence, J: int, h: float) -> bool:
    """Membership in the class of J-gap sequences with every gap at most h.

    A relative slack of 1e-12 absorbs representation error in uniformly
    spaced points; it is far below any meaningful margin.
    """
    if seq.count != J:
        return False
    slack = 1e-12 * max(1.0, abs(h))
    return bool(np.all(seq.gaps <= h + slack))
