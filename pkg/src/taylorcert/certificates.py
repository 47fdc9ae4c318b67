"""A-priori error certificates for truncated-equation runs.

Each certificate packages the guaranteed bounds that follow from the
derivative-growth constants alone, before any trajectory is computed:
the headline error level, its uniform-step variant, per-interval
deviation budgets, and (for continuously forced runs) the contraction
amplified sup and deviation bounds in both per-point and uniform form.
Feasibility flags record which hypotheses actually hold; an infeasible
certificate still carries the formal numbers so reports can show how
far the inputs miss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .constants import BoundConstants, k1_chain
from .errors import CapTooSmall, ConfigError, InfeasibleBudget
from .sampling import closed_form_h_bound, compute_aggregate

FLAG_SLACK = 1e-12


def bracket_terms(constants: BoundConstants, ell: int, rho: float):
    """Base and tail of the per-step error production bracket.

    The bracket at max step h is base + h * tail, where

      base = sum_{k=0..ell} (2^(k+1)/k!) [K^(k+1) r + K1(1-K^k)/(1-K)] r^k
      tail = (2^ell/ell!) [K^(ell+2) r + K1(1-K^(ell+1))/(1-K)] r^ell

    with r = rho / 2. Each step of length h_i then contributes at most
    h_i * (base + h * tail) to the accumulated deviation.
    """
    if ell < 0:
        raise ConfigError("truncation order must be nonnegative")
    if not 0.0 < rho:
        raise ConfigError("rho must be positive")
    K, K1 = constants.K, constants.K1
    r = rho / 2.0
    base = 0.0
    for k in range(ell + 1):
        coeff = (2.0 ** (k + 1)) / math.factorial(k)
        base += coeff * (K ** (k + 1) * r + k1_chain(K, K1, k)) * r ** k
    tail = ((2.0 ** ell) / math.factorial(ell)) * (
        K ** (ell + 2) * r + k1_chain(K, K1, ell + 1)
    ) * r ** ell
    return base, tail


def per_step_bracket(constants: BoundConstants, ell: int, rho: float,
                     h: float) -> float:
    """Bracket value B(h) = base + h * tail at uniform step h."""
    base, tail = bracket_terms(constants, ell, rho)
    return base + h * tail


def max_step_for_budget(constants: BoundConstants, ell: int, rho: float,
                        J: int) -> float:
    """Largest uniform h with J * h * B(h) <= rho.

    B(h) is affine in h, so the constraint is a quadratic with one
    positive root. Zero bracket means any step length fits.
    """
    if J < 1:
        raise ConfigError("J must be at least 1")
    base, tail = bracket_terms(constants, ell, rho)
    target = rho / J
    if tail <= 0.0:
        if base <= 0.0:
            return math.inf
        return target / base
    # tail * h^2 + base * h - target = 0, positive root
    disc = base * base + 4.0 * tail * target
    return (-base + math.sqrt(disc)) / (2.0 * tail)


@dataclass(frozen=True)
class MikTable:
    """Certified per-segment sups of the field derivatives.

    entries[i, k] bounds sup |f^(k)| over the states segment i can
    reach; the chained growth inequality certifies the same value
    K^k F0 + K1(1-K^k)/(1-K) for every segment.
    """

    entries: np.ndarray
    K: float
    K1: float
    F0: float

    @classmethod
    def from_constants(cls, constants: BoundConstants, J: int,
                       k_max: int) -> "MikTable":
        if J < 1 or k_max < 0:
            raise ConfigError("MikTable needs J >= 1 and k_max >= 0")
        row = np.array([constants.chain_bound(k) for k in range(k_max + 1)])
        return cls(entries=np.tile(row, (J, 1)), K=constants.K,
                   K1=constants.K1, F0=constants.F0)

    def terminal_bound(self) -> float:
        """Limit of the chained bound: F0 + K1/(1-K) when K < 1."""
        if self.K1 == 0.0:
            return self.F0 if self.K <= 1.0 else math.inf
        if self.K >= 1.0:
            return math.inf
        return self.F0 + self.K1 / (1.0 - self.K)

    def check(self) -> bool:
        k_count = self.entries.shape[1]
        chained = np.array([
            self.K ** k * self.F0 + k1_chain(self.K, self.K1, k)
            for k in range(k_count)
        ])
        tol = 1e-9 * (1.0 + self.F0 + self.K1)
        return bool(np.all(self.entries <= chained + tol))


@dataclass(frozen=True)
class ErrorCertificate:
    """A-priori bounds plus the flags that make them binding.

    epsilon1 bounds every per-interval deviation and the drift from the
    initial error; epsilon = epsilon1 + |e0| bounds the error itself.
    The *_bar values are the uniform-step variants. For continuously
    forced runs the four contraction bounds are filled in and
    tighter_form records which sup form wins; for the other kinds it
    compares epsilon1 against its uniform variant.
    """

    kind: str
    rho: float
    ell: int
    J: int
    h: float
    e0_bound: float
    epsilon1: float
    epsilon: float
    rho_bar: float
    epsilon1_bar: float
    epsilon_bar: float
    interval_dev_bound: float
    h_admissible: bool
    lambda_contraction: bool
    impulse_cap_ok: bool
    tighter_form: str
    sup_bound_per_point: Optional[float] = None
    dev_bound_per_point: Optional[float] = None
    sup_bound_uniform: Optional[float] = None
    dev_bound_uniform: Optional[float] = None
    lambda_contraction_uniform: bool = True
    inputs: dict = dc_field(default_factory=dict)
    notes: tuple = ()

    @property
    def feasible(self) -> bool:
        return self.h_admissible and self.lambda_contraction and self.impulse_cap_ok

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rho": self.rho,
            "ell": self.ell,
            "J": self.J,
            "h": self.h,
            "e0_bound": self.e0_bound,
            "epsilon1": self.epsilon1,
            "epsilon": self.epsilon,
            "rho_bar": self.rho_bar,
            "epsilon1_bar": self.epsilon1_bar,
            "epsilon_bar": self.epsilon_bar,
            "interval_dev_bound": self.interval_dev_bound,
            "sup_bound_per_point": self.sup_bound_per_point,
            "dev_bound_per_point": self.dev_bound_per_point,
            "sup_bound_uniform": self.sup_bound_uniform,
            "dev_bound_uniform": self.dev_bound_uniform,
            "h_admissible": self.h_admissible,
            "lambda_contraction": self.lambda_contraction,
            "lambda_contraction_uniform": self.lambda_contraction_uniform,
            "impulse_cap_ok": self.impulse_cap_ok,
            "feasible": self.feasible,
            "tighter_form": self.tighter_form,
            "inputs": dict(self.inputs),
            "notes": list(self.notes),
        }

    def with_measurements(self, max_abs: float,
                          max_interval_dev: Optional[float] = None,
                          max_dev_from_start: Optional[float] = None) -> dict:
        """Report dict pairing the bounds with measured errors."""
        out = self.to_dict()
        out["measured_max_abs"] = max_abs
        out["measured_max_interval_dev"] = max_interval_dev
        out["measured_max_dev_from_start"] = max_dev_from_start
        out["sound"] = bool(max_abs <= self.epsilon)
        if max_interval_dev is not None:
            out["interval_sound"] = bool(
                max_interval_dev <= self.interval_dev_bound)
        return out


def _h_admissible(constants: BoundConstants, ell: int, rho: float, J: int,
                  h: float) -> bool:
    """Joint step check: closed-form admissibility and the accumulation
    budget J * h * B(h) <= rho. The same test serves every certificate
    kind so that zero perturbations collapse exactly to the unperturbed
    numbers."""
    try:
        A = compute_aggregate(constants, ell, mode="true")
        bound = closed_form_h_bound(A, ell, rho, J)
    except InfeasibleBudget:
        return False
    if not h <= bound * (1.0 + FLAG_SLACK):
        return False
    budget = J * h * per_step_bracket(constants, ell, rho, h)
    return budget <= rho * (1.0 + FLAG_SLACK)


def _validate_common(constants, ell, rho, J, h):
    if not isinstance(constants, BoundConstants):
        raise ConfigError("constants must be a BoundConstants instance")
    if ell < 0:
        raise ConfigError("truncation order must be nonnegative")
    if not 0.0 < rho < 1.0:
        raise InfeasibleBudget("rho must lie in (0, 1)")
    if J < 1:
        raise ConfigError("J must be at least 1")
    if not h > 0.0:
        raise ConfigError("h must be positive")


def _base_certificate(kind: str, constants: BoundConstants, ell: int,
                      rho: float, J: int, h: float, gbar_list, e0: float):
    _validate_common(constants, ell, rho, J, h)
    gbars = [float(g) for g in gbar_list]
    if len(gbars) != J:
        raise ConfigError("need one impulse cap per gap")
    if any(g < 0 for g in gbars):
        raise ConfigError("impulse caps must be nonnegative")

    e0_abs = abs(float(e0))
    gbar = max(gbars) if gbars else 0.0
    sum_g = float(sum(gbars))

    epsilon1 = rho + sum_g
    epsilon = epsilon1 + e0_abs
    rho_bar = h * per_step_bracket(constants, ell, rho, h)
    epsilon1_bar = rho_bar + J * gbar
    epsilon_bar = epsilon1_bar + e0_abs
    h_ok = _h_admissible(constants, ell, rho, J, h)
    interval_dev = rho + gbar
    tighter = "per_point" if epsilon1 <= epsilon1_bar else "uniform"

    inputs = {
        "K": constants.K, "K1": constants.K1, "F0": constants.F0,
        "ell": ell, "rho": rho, "J": J, "h": h,
        "gbar_list": gbars, "e0": float(e0),
    }
    return (gbars, gbar, sum_g, e0_abs, epsilon1, epsilon, rho_bar,
            epsilon1_bar, epsilon_bar, h_ok, interval_dev, tighter, inputs)


def certify_unperturbed(constants: BoundConstants, ell: int, rho: float,
                        J: int, h: float, e0: float) -> ErrorCertificate:
    """Certificate for the unforced truncated equation.

    epsilon1 = rho bounds each per-interval deviation, and the error
    itself stays within |e0| + rho whenever the step check holds.
    """
    (_, _, _, e0_abs, eps1, eps, rho_bar, eps1_bar, eps_bar, h_ok,
     interval_dev, tighter, inputs) = _base_certificate(
        "unperturbed", constants, ell, rho, J, h, [0.0] * J, e0)
    return ErrorCertificate(
        kind="unperturbed", rho=rho, ell=ell, J=J, h=h, e0_bound=e0_abs,
        epsilon1=eps1, epsilon=eps, rho_bar=rho_bar, epsilon1_bar=eps1_bar,
        epsilon_bar=eps_bar, interval_dev_bound=interval_dev,
        h_admissible=h_ok, lambda_contraction=True, impulse_cap_ok=True,
        tighter_form=tighter, inputs=inputs)


def certify_impulsive(constants: BoundConstants, ell: int, rho: float,
                      J: int, h: float, gbar_list, e0: float) -> ErrorCertificate:
    """Certificate for impulses of size at most gbar_list[i] at each
    right endpoint.

    The uniform cap must dominate the initial error: the induction that
    carries the bound across gaps charges e(t_0) against the same cap
    that absorbs each jump.
    """
    out = _base_certificate("impulsive", constants, ell, rho, J, h,
                            gbar_list, e0)
    (_, gbar, _, e0_abs, eps1, eps, rho_bar, eps1_bar, eps_bar, h_ok,
     interval_dev, tighter, inputs) = out
    if gbar < e0_abs - 1e-15:
        raise CapTooSmall(
            f"impulse cap {gbar!r} does not cover the initial error {e0_abs!r}")
    return ErrorCertificate(
        kind="impulsive", rho=rho, ell=ell, J=J, h=h, e0_bound=e0_abs,
        epsilon1=eps1, epsilon=eps, rho_bar=rho_bar, epsilon1_bar=eps1_bar,
        epsilon_bar=eps_bar, interval_dev_bound=interval_dev,
        h_admissible=h_ok, lambda_contraction=True, impulse_cap_ok=True,
        tighter_form=tighter, inputs=inputs)


def certify_continuous(constants: BoundConstants, ell: int, rho: float,
                       J: int, h_list, lambda_list, gbar_list,
                       e0: float) -> ErrorCertificate:
    """Certificate when a bounded rate lambda(t) forces both equations.

    Requires the contraction sum_i h_i lambda_i < 1; the sup and
    deviation bounds are reported in per-point and uniform form and the
    tighter sup form is marked. The uniform pair needs J h lambda < 1
    as well and degrades to infinity without it.
    """
    hs = [float(v) for v in h_list]
    lams = [float(v) for v in lambda_list]
    if not hs or len(hs) != len(lams):
        raise ConfigError("need matching per-gap step and rate lists")
    if len(hs) != J:
        raise ConfigError("need one step length per gap")
    if any(v <= 0 for v in hs):
        raise ConfigError("step lengths must be positive")
    if any(v < 0 for v in lams):
        raise ConfigError("rate caps must be nonnegative")
    h = max(hs)

    (gbars, gbar, sum_g, e0_abs, eps1, eps, rho_bar, eps1_bar, eps_bar,
     h_ok, _, _, inputs) = _base_certificate(
        "continuous", constants, ell, rho, J, h, gbar_list, e0)
    inputs["h_list"] = hs
    inputs["lambda_list"] = lams

    base, tail = bracket_terms(constants, ell, rho)
    S = float(sum(hi * li for hi, li in zip(hs, lams)))
    lam_max = max(lams)
    S_uniform = J * h * lam_max

    contraction = S < 1.0 - FLAG_SLACK
    contraction_uniform = S_uniform < 1.0 - FLAG_SLACK

    accum_pp = float(sum(hi * (base + hi * tail) for hi in hs))
    core_pp = e0_abs + accum_pp + sum_g
    if contraction:
        sup_pp = core_pp / (1.0 - S)
        dev_pp = (S / (1.0 - S)) * core_pp
        cap_needed = (S / (1.0 - S)) * e0_abs
        cap_ok = gbar >= cap_needed - 1e-15
    else:
        sup_pp = math.inf
        dev_pp = math.inf
        cap_ok = False

    accum_u = J * h * (base + h * tail)
    if contraction_uniform:
        sup_u = (e0_abs + accum_u + J * gbar) / (1.0 - S_uniform)
        dev_u = (S_uniform / (1.0 - S_uniform)) * (accum_u + J * gbar)
    else:
        sup_u = math.inf
        dev_u = math.inf

    tighter = "per_point" if sup_pp <= sup_u else "uniform"
    notes = ("the derivative growth hypothesis is applied to the forcing "
             "term in the same form as to the field",)

    return ErrorCertificate(
        kind="continuous", rho=rho, ell=ell, J=J, h=h, e0_bound=e0_abs,
        epsilon1=eps1, epsilon=eps, rho_bar=rho_bar, epsilon1_bar=eps1_bar,
        epsilon_bar=eps_bar, interval_dev_bound=eps1,
        h_admissible=h_ok, lambda_contraction=contraction,
        lambda_contraction_uniform=contraction_uniform,
        impulse_cap_ok=cap_ok, tighter_form=tighter,
        sup_bound_per_point=sup_pp, dev_bound_per_point=dev_pp,
        sup_bound_uniform=sup_u, dev_bound_uniform=dev_u,
        inputs=inputs, notes=notes)


def initial_condition_bound(K: float, t0: float, tJ: float,
                            rho: float) -> float:
    """Largest |y0| for which the true-solution deviation check is
    automatic over the whole window: (rho/2)(1 - K (tJ - t0))."""
    if K < 0:
        raise ConfigError("K must be nonnegative")
    if not tJ > t0:
        raise ConfigError("tJ must exceed t0")
    if not rho > 0:
        raise ConfigError("rho must be positive")
    span = K * (tJ - t0)
    if span >= 1.0:
        raise InfeasibleBudget(
            f"K * (tJ - t0) = {span!r} reaches 1; the direct bound vanishes")
    return (rho / 2.0) * (1.0 - span)
