"""Segmentwise integration of the truncated equation and its reference.

On each segment [t_i, t_{i+1}] the truncated equation freezes the field's
derivative stack at the left endpoint and solves

    dx/dt = sum_{k=0..ell} f^(k)(x(t_i), t_i) / k! * (x - x(t_i))^k

exactly where a closed form exists (ell <= 1) and by fixed-substep RK4
otherwise. Impulsive perturbations attach to the right endpoint of their
segment: the jump convention puts x(t_{i+1}) on the post-jump side, and
the next segment starts from the jumped value. A continuous perturbation
rate lambda(t) adds lambda(t) * x to both equations and forces the
substepped path since the closed forms no longer apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from ._kernels import LAM_CUSTOM, LAM_NONE
from .errors import BlowUp, DomainMismatch, OracleUnreliable
from .fields import LAMBDA_ZERO, LambdaSpec
from .problems import DerivativeStack, OdeProblem, eval_derivatives
from .sampling import SamplingSequence

DEGENERATE_RATE = 1e-14  # below this |a1| the exponential form is unusable
ORACLE_FLAG_LEVEL = 1e-9
ORACLE_FAIL_LEVEL = 1e-6


@dataclass(frozen=True)
class PerturbationSpec:
    """Impulse sizes, their uniform cap, and a continuous rate lambda(t).

    impulses may be None, a single float applied at every interior and
    terminal sampling point, or an array with one entry per gap; entry i
    is the jump applied at point i + 1.
    """

    impulses: Optional[object] = None
    impulse_cap: float = 0.0
    lam: LambdaSpec = LAMBDA_ZERO

    def __post_init__(self):
        if self.impulse_cap < 0:
            raise ValueError("impulse_cap must be nonnegative")
        if self.impulses is not None and not np.isscalar(self.impulses):
            arr = np.asarray(self.impulses, dtype=np.float64)
            object.__setattr__(self, "impulses", arr)
            if self.impulse_cap > 0 and np.any(np.abs(arr) > self.impulse_cap + 1e-15):
                raise ValueError("an impulse exceeds the declared cap")
        elif np.isscalar(self.impulses) and self.impulse_cap > 0:
            if abs(float(self.impulses)) > self.impulse_cap + 1e-15:
                raise ValueError("the impulse amplitude exceeds the declared cap")

    @property
    def has_impulses(self) -> bool:
        if self.impulses is None:
            return False
        if np.isscalar(self.impulses):
            return float(self.impulses) != 0.0
        return bool(np.any(np.asarray(self.impulses) != 0.0))

    @property
    def has_lambda(self) -> bool:
        return self.lam.code != LAM_NONE or self.lam.fn is not None

    def impulse_at(self, gap_index: int) -> float:
        """Jump applied at the right endpoint of segment gap_index."""
        if self.impulses is None:
            return 0.0
        if np.isscalar(self.impulses):
            return float(self.impulses)
        arr = self.impulses
        return float(arr[gap_index]) if gap_index < len(arr) else 0.0

    def caps_list(self, J: int) -> list[float]:
        """Per-point impulse caps, one per gap, from the actual sizes."""
        return [abs(self.impulse_at(i)) for i in range(J)]

    def gbar(self, J: int) -> float:
        caps = self.caps_list(J)
        top = max(caps) if caps else 0.0
        return max(self.impulse_cap, top)

    def lambda_caps(self, seq: SamplingSequence, samples: int = 513) -> np.ndarray:
        """Per-segment sup of lambda(t), sampled on a fine grid.

        Exact for constant rates; a sampled estimate otherwise.
        """
        caps = np.empty(seq.count)
        for i in range(seq.count):
            ta, tb = seq.points[i], seq.points[i + 1]
            if self.lam.code == LAM_NONE and self.lam.fn is None:
                caps[i] = 0.0
            elif self.lam.code == _kernels.LAM_CONSTANT:
                caps[i] = self.lam.value(ta)
            else:
                ts = np.linspace(ta, tb, samples)
                caps[i] = max(self.lam.value(float(t)) for t in ts)
        return caps

    def describe(self) -> dict:
        if self.impulses is None:
            imp = None
        elif np.isscalar(self.impulses):
            imp = float(self.impulses)
        else:
            imp = [float(v) for v in self.impulses]
        return {
            "impulses": imp,
            "impulse_cap": self.impulse_cap,
            "lambda": self.lam.describe(),
        }


NO_PERTURBATION = PerturbationSpec()


@dataclass
class Trajectory:
    """Dense segmentwise values on a shared sampling sequence.

    seg_values[i] holds the continuous piece on [t_i, t_{i+1}]: its first
    entry is the post-jump state at t_i and its last the pre-jump state
    at t_{i+1}. sample_pre and sample_post record both sides of every
    sampling point.
    """

    points: np.ndarray
    seg_times: list
    seg_values: list
    sample_pre: np.ndarray
    sample_post: np.ndarray
    origin: str
    oracle_rel_err: Optional[float] = None
    oracle_flagged: bool = False
    max_abs: Optional[float] = None
    max_sample_step: Optional[float] = None
    max_dev_from_start: Optional[float] = None
    max_interval_dev: Optional[float] = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def segment_count(self) -> int:
        return len(self.seg_values)

    def dense_arrays(self):
        """Concatenated (t, value, segment_index, post_jump) rows."""
        ts, vs, seg, post = [], [], [], []
        for i, (st, sv) in enumerate(zip(self.seg_times, self.seg_values)):
            ts.append(st)
            vs.append(sv)
            seg.append(np.full(len(st), i))
            flags = np.zeros(len(st), dtype=int)
            if self.sample_post[i] != self.sample_pre[i]:
                flags[0] = 1
            post.append(flags)
        return (np.concatenate(ts), np.concatenate(vs),
                np.concatenate(seg), np.concatenate(post))

    def value(self, t):
        """Interpolated value, right-continuous across jump points."""
        ts, vs, _, _ = self.dense_arrays()
        order = np.argsort(ts, kind="stable")
        return np.interp(t, ts[order], vs[order])

    def segment_sup_deviation(self) -> np.ndarray:
        """Per segment, the sup of |value - value at the left endpoint|."""
        return np.array([float(np.max(np.abs(sv - sv[0]))) for sv in self.seg_values])

    def max_abs_value(self) -> float:
        dense = max(float(np.max(np.abs(sv))) for sv in self.seg_values)
        return max(dense, float(np.max(np.abs(self.sample_post))))

    def to_csv(self, path: str) -> None:
        ts, vs, seg, post = self.dense_arrays()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,value,segment_index,post_jump\n")
            for t, v, s, p in zip(ts, vs, seg, post):
                fh.write(f"{float(t)!r},{float(v)!r},{int(s)},{int(p)}\n")


def _check_finite(xs: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(xs)):
        raise BlowUp(f"{what} escaped to a non-finite value")


def _rk4_dense_callable(rhs: Callable, y_start: float, t_start: float,
                        h_seg: float, n_cells: int, m_sub: int) -> np.ndarray:
    # Generic Python stepper for custom callables the kernels cannot see.
    out = np.empty(n_cells + 1)
    out[0] = y_start
    y = y_start
    dt = h_seg / (n_cells * m_sub)
    step = 0
    for c in range(n_cells):
        for _ in range(m_sub):
            t = t_start + step * dt
            k1 = rhs(y, t)
            k2 = rhs(y + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = rhs(y + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = rhs(y + dt * k3, t + dt)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            step += 1
        if not math.isfinite(y):
            out[c + 1:] = math.nan
            return out
        out[c + 1] = y
    return out


def local_flow(stack: DerivativeStack, x_start: float, t_start: float, t_end: float,
               lam: Optional[LambdaSpec] = None, n_cells: int = 1000,
               substeps: int = 10_000):
    """Solve the frozen-coefficient segment equation on [t_start, t_end].

    Closed forms: order 0 is linear drift, order 1 with a non-degenerate
    linear rate is exponential. Everything else, and any segment with a
    continuous rate attached, runs the fixed-substep RK4 (substeps total
    across the segment, values reported on n_cells + 1 grid points).
    """
    if not t_end > t_start:
        raise ValueError("t_end must exceed t_start")
    lam = lam or LAMBDA_ZERO
    has_lam = lam.code != LAM_NONE or lam.fn is not None
    a = stack.scaled(stack.order)
    ts = np.linspace(t_start, t_end, n_cells + 1)

    if not has_lam and stack.order == 0:
        xs = x_start + a[0] * (ts - t_start)
        _check_finite(xs, "segment flow")
        return ts, xs
    if not has_lam and stack.order == 1 and abs(a[1]) >= DEGENERATE_RATE:
        xs = x_start + (a[0] / a[1]) * np.expm1(a[1] * (ts - t_start))
        _check_finite(xs, "segment flow")
        return ts, xs

    m_sub = max(1, substeps // n_cells)
    if lam.code == LAM_CUSTOM:
        def rhs(x, t):
            d = x - stack.y
            acc = a[-1]
            for i in range(len(a) - 2, -1, -1):
                acc = acc * d + a[i]
            return acc + lam.fn(t) * x

        xs = _rk4_dense_callable(rhs, x_start, t_start, t_end - t_start,
                                 n_cells, m_sub)
    else:
        xs = _kernels.rk4_poly_dense(a, stack.y, x_start, t_start,
                                     t_end - t_start, n_cells, m_sub,
                                     lam.code, lam.params)
    _check_finite(xs, "segment flow")
    return ts, xs


def _truncated_segment(problem: OdeProblem, ell: int, x_start: float,
                       t_start: float, t_end: float, lam: LambdaSpec,
                       n_cells: int, substeps: int):
    stack = eval_derivatives(problem, x_start, t_start, ell)
    return local_flow(stack, x_start, t_start, t_end, lam=lam,
                      n_cells=n_cells, substeps=substeps)


def _reference_segment(problem: OdeProblem, y_start: float, t_start: float,
                       t_end: float, lam: LambdaSpec, substeps_per_unit: int,
                       n_cells: int):
    """One high-accuracy segment plus a half-step self check.

    Returns (times, fine values, relative end-point discrepancy). The
    finer of the two runs is always kept.
    """
    h_seg = t_end - t_start
    ts = np.linspace(t_start, t_end, n_cells + 1)
    m = max(1, math.ceil(substeps_per_unit * h_seg / n_cells))
    spec = problem.field

    if spec.is_builtin and lam.code != LAM_CUSTOM:
        coarse = _kernels.rk4_field_dense(spec.code, spec.params, y_start,
                                          t_start, h_seg, n_cells, m,
                                          lam.code, lam.params)
        fine = _kernels.rk4_field_dense(spec.code, spec.params, y_start,
                                        t_start, h_seg, n_cells, 2 * m,
                                        lam.code, lam.params)
    else:
        def rhs(y, t):
            return spec.value(y, t) + lam.value(t) * y

        coarse = _rk4_dense_callable(rhs, y_start, t_start, h_seg, n_cells, m)
        fine = _rk4_dense_callable(rhs, y_start, t_start, h_seg, n_cells, 2 * m)

    _check_finite(fine, "reference flow")
    rel = abs(coarse[-1] - fine[-1]) / max(1.0, abs(fine[-1]))
    return ts, fine, rel


def integrate_truncated(problem: OdeProblem, seq: SamplingSequence, ell: int,
                        x0: float, perturbation: Optional[PerturbationSpec] = None,
                        n_cells: int = 1000, substeps: int = 10_000) -> Trajectory:
    """Integrate the truncated equation along the sampling sequence.

    Coefficients refresh at every sampling point from the current state,
    impulses land on right endpoints, and each post-jump value seeds the
    next segment.
    """
    pert = perturbation or NO_PERTURBATION
    J = seq.count
    seg_times, seg_values = [], []
    sample_pre = np.empty(J + 1)
    sample_post = np.empty(J + 1)
    sample_pre[0] = sample_post[0] = x0

    x = float(x0)
    for i in range(J):
        ta, tb = float(seq.points[i]), float(seq.points[i + 1])
        ts, xs = _truncated_segment(problem, ell, x, ta, tb, pert.lam,
                                    n_cells, substeps)
        seg_times.append(ts)
        seg_values.append(xs)
        pre = float(xs[-1])
        sample_pre[i + 1] = pre
        x = pre + pert.impulse_at(i)
        sample_post[i + 1] = x

    return Trajectory(points=seq.points.copy(), seg_times=seg_times,
                      seg_values=seg_values, sample_pre=sample_pre,
                      sample_post=sample_post, origin="truncated",
                      meta={"ell": ell, "x0": x0})


def integrate_reference(problem: OdeProblem, seq: SamplingSequence, y0: float,
                        perturbation_lambda: Optional[LambdaSpec] = None,
                        substeps_per_unit: int = 100_000,
                        n_cells: int = 1000) -> Trajectory:
    """High-accuracy solution of the full equation on the same grid.

    Classical fixed-step fourth-order method, default 1e5 steps per unit
    time, with a half-step comparison recorded per run. An estimate at or
    above 1e-9 flags the result; above 1e-6 it is refused outright.
    """
    lam = perturbation_lambda or LAMBDA_ZERO
    J = seq.count
    seg_times, seg_values = [], []
    sample = np.empty(J + 1)
    sample[0] = y0
    worst = 0.0

    y = float(y0)
    for i in range(J):
        ta, tb = float(seq.points[i]), float(seq.points[i + 1])
        ts, ys, rel = _reference_segment(problem, y, ta, tb, lam,
                                         substeps_per_unit, n_cells)
        worst = max(worst, rel)
        seg_times.append(ts)
        seg_values.append(ys)
        y = float(ys[-1])
        sample[i + 1] = y

    if worst > ORACLE_FAIL_LEVEL:
        raise OracleUnreliable(
            f"oracle self-check {worst:.3e} exceeds {ORACLE_FAIL_LEVEL:.0e}"
        )
    return Trajectory(points=seq.points.copy(), seg_times=seg_times,
                      seg_values=seg_values, sample_pre=sample.copy(),
                      sample_post=sample.copy(), origin="reference",
                      oracle_rel_err=worst,
                      oracle_flagged=bool(worst >= ORACLE_FLAG_LEVEL),
                      meta={"y0": y0, "substeps_per_unit": substeps_per_unit})


def error_trajectory(true_traj: Trajectory, approx_traj: Trajectory) -> Trajectory:
    """Pointwise error e(t) = y(t) - x(t) on the shared fine grid.

    Also records the summary statistics the certificates are judged
    against. Sampling-point errors follow the post-jump convention, so
    e(t_0) is exactly y0 - x0.
    """
    if len(true_traj.points) != len(approx_traj.points) or \
            float(np.max(np.abs(true_traj.points - approx_traj.points))) > 1e-12:
        raise DomainMismatch("trajectories do not share a sampling sequence")
    for st, at in zip(true_traj.seg_times, approx_traj.seg_times):
        if len(st) != len(at):
            raise DomainMismatch("trajectories do not share the fine grid")

    seg_err = [tv - av for tv, av in
               zip(true_traj.seg_values, approx_traj.seg_values)]
    es_pre = true_traj.sample_pre - approx_traj.sample_pre
    es_post = true_traj.sample_post - approx_traj.sample_post

    dense_max = max(float(np.max(np.abs(e))) for e in seg_err)
    max_abs = max(dense_max, float(np.max(np.abs(es_post))),
                  float(np.max(np.abs(es_pre))))
    max_sample_step = float(np.max(np.abs(np.diff(es_post)))) if len(es_post) > 1 else 0.0

    e0 = float(es_post[0])
    dev_start = max(float(np.max(np.abs(e - e0))) for e in seg_err)
    dev_start = max(dev_start, float(np.max(np.abs(es_post - e0))))

    interval_dev = 0.0
    for i, e in enumerate(seg_err):
        local = float(np.max(np.abs(e - e[0])))
        # the jump at the right endpoint belongs to this interval
        local = max(local, abs(float(es_post[i + 1]) - float(e[0])))
        interval_dev = max(interval_dev, local)

    return Trajectory(points=true_traj.points.copy(),
                      seg_times=[t.copy() for t in true_traj.seg_times],
                      seg_values=seg_err,
                      sample_pre=es_pre, sample_post=es_post, origin="error",
                      max_abs=max_abs, max_sample_step=max_sample_step,
                      max_dev_from_start=dev_start,
                      max_interval_dev=interval_dev)


def segment_deviation_probe(problem: OdeProblem, ell: int, x0: float,
                            y0: Optional[float] = None,
                            perturbation: Optional[PerturbationSpec] = None,
                            substeps_per_unit: int = 100_000,
                            probe_cells: int = 10_000,
                            substeps: int = 10_000) -> Callable:
    """Factory for build_sampling's integrate_segment argument.

    The returned callable maps (t_start, t_end) to a deviation evaluator
    for a tentative segment anchored at the committed state at t_start.
    When y0 is given, the deviation is the pointwise max of the truncated
    and reference deviations (the joint first-exit measure); otherwise it
    tracks the truncated flow alone. Committed states advance with the
    exact segment routines the final integration uses, so the sequence
    built from these probes is consistent with the eventual run. Calls
    must move forward in time.
    """
    pert = perturbation or NO_PERTURBATION
    state = {"t": problem.t0, "x": float(x0),
             "y": None if y0 is None else float(y0), "gap": 0}

    def advance_to(t_next: float) -> None:
        ta = state["t"]
        _, xs = _truncated_segment(problem, ell, state["x"], ta, t_next,
                                   pert.lam, 1000, substeps)
        x = float(xs[-1]) + pert.impulse_at(state["gap"])
        y = state["y"]
        if y is not None:
            _, ys, _ = _reference_segment(problem, y, ta, t_next, pert.lam,
                                          substeps_per_unit, 1000)
            y = float(ys[-1])
        state.update(t=t_next, x=x, y=y, gap=state["gap"] + 1)

    def probe(t_start: float, t_end: float) -> Callable:
        tiny = 1e-12 * max(1.0, abs(t_end))
        if t_start > state["t"] + tiny:
            advance_to(t_start)
        elif t_start < state["t"] - tiny:
            raise ValueError("probe calls must move forward in time")

        ts, xs = _truncated_segment(problem, ell, state["x"], t_start, t_end,
                                    pert.lam, probe_cells, substeps)
        x_dev = np.abs(xs - xs[0])
        if state["y"] is not None:
            m = max(1, math.ceil(substeps_per_unit * (t_end - t_start) / probe_cells))
            spec = problem.field
            if spec.is_builtin and pert.lam.code != LAM_CUSTOM:
                ys = _kernels.rk4_field_dense(spec.code, spec.params, state["y"],
                                              t_start, t_end - t_start,
                                              probe_cells, m, pert.lam.code,
                                              pert.lam.params)
            else:
                def rhs(y, t):
                    return spec.value(y, t) + pert.lam.value(t) * y

                ys = _rk4_dense_callable(rhs, state["y"], t_start,
                                         t_end - t_start, probe_cells, m)
            _check_finite(ys, "reference flow")
            dev = np.maximum(x_dev, np.abs(ys - ys[0]))
        else:
            dev = x_dev

        def evaluate(t):
            return np.interp(t, ts, dev)

        return evaluate

    return probe
