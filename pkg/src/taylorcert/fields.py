"""Built-in right-hand-side library and perturbation rate forms.

Every built-in field ships exact partial derivatives in the state variable
to all orders, so derivative stacks are analytic rather than differenced.
Custom fields are supported through plain callables and run on the generic
Python integration path instead of the compiled kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from ._kernels import (
    FIELD_AFFINE,
    FIELD_CONSTANT,
    FIELD_CUSTOM,
    FIELD_DAMPED_DRIVEN,
    FIELD_LOGISTIC,
    FIELD_QUADRATIC,
    FIELD_SINE,
    FIELD_ZERO,
    LAM_CONSTANT,
    LAM_CUSTOM,
    LAM_NONE,
    LAM_SINE,
    pack_params,
)
from .errors import ConfigError

# name -> (code, ordered parameter names, polynomial degree in y or None)
_BUILTINS: dict[str, tuple[int, tuple[str, ...], Optional[int]]] = {
    "zero": (FIELD_ZERO, (), 0),
    "constant": (FIELD_CONSTANT, ("value",), 0),
    "affine": (FIELD_AFFINE, ("a", "b"), 1),
    "logistic": (FIELD_LOGISTIC, (), 2),
    "damped_driven": (FIELD_DAMPED_DRIVEN, (), 1),
    "sine": (FIELD_SINE, ("amplitude",), None),
    "quadratic": (FIELD_QUADRATIC, ("a", "b", "c"), 2),
}


@dataclass(frozen=True)
class FieldSpec:
    """A right-hand side f(y, t), either a coded built-in or a custom pair.

    Custom specs carry ``value_fn(y, t)`` and ``derivative_fn(y, t, k)``;
    the toolkit never differentiates user expressions symbolically.
    """

    name: str
    code: int
    params: np.ndarray = field(default_factory=lambda: _kernels.NO_PARAMS)
    poly_degree: Optional[int] = None
    value_fn: Optional[Callable[[float, float], float]] = None
    derivative_fn: Optional[Callable[[float, float, int], float]] = None

    @property
    def is_builtin(self) -> bool:
        return self.code != FIELD_CUSTOM

    def value(self, y: float, t: float) -> float:
        if self.is_builtin:
            return _kernels.field_deriv(self.code, self.params, y, t, 0)
        return float(self.value_fn(y, t))

    def derivative(self, y: float, t: float, k: int) -> float:
        if self.is_builtin:
            return _kernels.field_deriv(self.code, self.params, y, t, k)
        return float(self.derivative_fn(y, t, k))

    def describe(self) -> dict:
        return {"name": self.name, "params": [float(v) for v in self.params]}


def make_field(name: str, **params) -> FieldSpec:
    """Build a FieldSpec for one of the built-in field names."""
    if name not in _BUILTINS:
        raise ConfigError(
            f"unknown field {name!r}, expected one of {sorted(_BUILTINS)}"
        )
    code, param_names, degree = _BUILTINS[name]
    unknown = set(params) - set(param_names)
    if unknown:
        raise ConfigError(f"field {name!r} does not take parameters {sorted(unknown)}")
    missing = [p for p in param_names if p not in params]
    if missing:
        raise ConfigError(f"field {name!r} requires parameters {missing}")
    values = tuple(float(params[p]) for p in param_names)
    return FieldSpec(name=name, code=code, params=pack_params(values), poly_degree=degree)


def custom_field(name: str, value_fn, derivative_fn, poly_degree=None) -> FieldSpec:
    """Wrap user callables as a field. Runs on the Python path only."""
    return FieldSpec(
        name=name,
        code=FIELD_CUSTOM,
        params=_kernels.NO_PARAMS,
        poly_degree=poly_degree,
        value_fn=value_fn,
        derivative_fn=derivative_fn,
    )


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


@dataclass(frozen=True)
class LambdaSpec:
    """A continuous perturbation rate lambda(t) multiplying the state."""

    name: str
    code: int
    params: np.ndarray = field(default_factory=lambda: _kernels.NO_PARAMS)
    fn: Optional[Callable[[float], float]] = None

    @property
    def is_builtin(self) -> bool:
        return self.code != LAM_CUSTOM

    def value(self, t: float) -> float:
        if self.is_builtin:
            return _kernels.lam_value(self.code, self.params, t)
        return float(self.fn(t))

    def describe(self) -> dict:
        return {"name": self.name, "params": [float(v) for v in self.params]}


LAMBDA_ZERO = LambdaSpec(name="zero", code=LAM_NONE)


def make_lambda(kind: str, **params) -> LambdaSpec:
    if kind in ("zero", "none"):
        return LAMBDA_ZERO
    if kind == "constant":
        return LambdaSpec(name="constant", code=LAM_CONSTANT,
                          params=pack_params((params.get("value", 0.0),)))
    if kind == "sine":
        vals = (params.get("amplitude", 0.0), params.get("frequency", 1.0),
                params.get("phase", 0.0))
        return LambdaSpec(name="sine", code=LAM_SINE, params=pack_params(vals))
    raise ConfigError(f"unknown perturbation rate kind {kind!r}")


def custom_lambda(fn: Callable[[float], float], name: str = "custom") -> LambdaSpec:
    return LambdaSpec(name=name, code=LAM_CUSTOM, fn=fn)
