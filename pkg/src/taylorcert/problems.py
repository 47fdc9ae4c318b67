"""Problem definitions: a scalar initial value problem on a box.

The working box is [y0 - theta, y0 + theta] x [t0, t_end]. All growth
constants and sup norms refer to this box, so everything downstream is a
statement about the box, not about the whole plane.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigError, NumericalDomainError, OrderError
from .fields import FieldSpec, make_field


@dataclass(frozen=True)
class OdeProblem:
    """Scalar IVP dy/dt = f(y, t), y(t0) = y0, studied on a fixed box."""

    field: FieldSpec
    y0: float
    t0: float
    t_end: float
    theta: float
    smoothness_order: int

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ConfigError("t_end must exceed t0")
        if self.theta < 0:
            raise ConfigError("theta must be nonnegative")
        if self.smoothness_order < 0:
            raise ConfigError("smoothness order must be nonnegative")

    @property
    def y_lo(self) -> float:
        return self.y0 - self.theta

    @property
    def y_hi(self) -> float:
        return self.y0 + self.theta

    @property
    def window(self) -> float:
        return self.t_end - self.t0

    def describe(self) -> dict:
        return {
            "field": self.field.describe(),
            "y0": self.y0,
            "t0": self.t0,
            "t_end": self.t_end,
            "theta": self.theta,
            "smoothness_order": self.smoothness_order,
        }


@dataclass(frozen=True)
class DerivativeStack:
    """Derivatives of the field in y, frozen at one point (y, t).

    coeffs[k] holds the k-th partial derivative, not yet divided by k!.
    """

    y: float
    t: float
    coeffs: np.ndarray

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def scaled(self, ell: int) -> np.ndarray:
        """Taylor coefficients coeffs[k] / k! up to order ell."""
        if ell > self.order:
            raise OrderError(f"stack holds order {self.order}, asked for {ell}")
        out = np.empty(ell + 1, dtype=np.float64)
        fact = 1.0
        for k in range(ell + 1):
            if k > 1:
                fact *= k
            out[k] = self.coeffs[k] / fact
        return out


def eval_field(problem: OdeProblem, y: float, t: float) -> float:
    """Evaluate f(y, t). Non-finite results raise, they never propagate."""
    v = problem.field.value(y, t)
    if not math.isfinite(v):
        raise NumericalDomainError(
            f"field {problem.field.name!r} non-finite at (y={y}, t={t})"
        )
    return v


def eval_derivatives(problem: OdeProblem, y: float, t: float, k_max: int) -> DerivativeStack:
    """Stack of partial derivatives in y at (y, t) for k = 0 .. k_max.

    k_max may not exceed the problem's declared smoothness order.
    """
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    if k_max > problem.smoothness_order:
        raise OrderError(
            f"k_max={k_max} exceeds declared smoothness order "
            f"{problem.smoothness_order}"
        )
    coeffs = np.empty(k_max + 1, dtype=np.float64)
    for k in range(k_max + 1):
        coeffs[k] = problem.field.derivative(y, t, k)
    if not np.all(np.isfinite(coeffs)):
        raise NumericalDomainError(
            f"derivative stack non-finite at (y={y}, t={t})"
        )
    return DerivativeStack(y=float(y), t=float(t), coeffs=coeffs)


def problem_from_config(cfg: Mapping) -> OdeProblem:
    """Build an OdeProblem from a plain mapping (the JSON config shape)."""
    try:
        field_name = cfg["field"]
        t0 = float(cfg["t0"])
        t_end = float(cfg["tJ"]) if "tJ" in cfg else float(cfg["t_end"])
        y0 = float(cfg["y0"])
        theta = float(cfg["theta"])
        n = int(cfg["n"]) if "n" in cfg else int(cfg["smoothness_order"])
    except KeyError as exc:
        raise ConfigError(f"problem config missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem config has a malformed value: {exc}") from exc
    params = dict(cfg.get("params", {}))
    spec = make_field(field_name, **params)
    return OdeProblem(field=spec, y0=y0, t0=t0, t_end=t_end, theta=theta,
                      smoothness_order=n)


def load_problem(path: str) -> OdeProblem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"problem file {path} is not valid JSON: {exc}") from exc
    return problem_from_config(cfg)
