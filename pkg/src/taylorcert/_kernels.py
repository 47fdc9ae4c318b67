"""Hot numeric kernels with two interchangeable backends.

The same source functions are built twice: once compiled with numba's
``@njit`` (the default whenever numba imports) and once as plain Python
operating on NumPy scalars. Selection happens at import time through the
``TAYLORCERT_DISABLE_NUMBA`` environment variable and can be changed at
runtime with :func:`set_backend`, which benchmarks and parity tests use.

Kernels never raise domain errors themselves. A state that escapes to a
non-finite value poisons the remainder of the output array with NaN and
the caller decides which exception fits.
"""

from __future__ import annotations

import math
import os
import warnings

import numpy as np

# Integer codes for the built-in field library. Parameter vectors are
# float64 arrays padded to at least length three.
FIELD_ZERO = 0
FIELD_CONSTANT = 1
FIELD_AFFINE = 2
FIELD_LOGISTIC = 3
FIELD_DAMPED_DRIVEN = 4
FIELD_SINE = 5
FIELD_QUADRATIC = 6
FIELD_CUSTOM = -1

LAM_NONE = 0
LAM_CONSTANT = 1
LAM_SINE = 2
LAM_CUSTOM = -1

_HALF_PI = 0.5 * math.pi

ENV_FLAG = "TAYLORCERT_DISABLE_NUMBA"


def _build(jit):
    """Construct the kernel set under a given compilation decorator."""

    @jit
    def field_deriv(code, params, y, t, k):
        # k-th partial derivative in y of the field, time entering only
        # through t where the field is time varying.
        if code == 0:
            return 0.0
        if code == 1:
            if k == 0:
                return params[0]
            return 0.0
        if code == 2:
            if k == 0:
                return params[0] * y + params[1]
            if k == 1:
                return params[0]
            return 0.0
        if code == 3:
            if k == 0:
                return y * (1.0 - y)
            if k == 1:
                return 1.0 - 2.0 * y
            if k == 2:
                return -2.0
            return 0.0
        if code == 4:
            if k == 0:
                return -y + math.sin(t)
            if k == 1:
                return -1.0
            return 0.0
        if code == 5:
            return params[0] * math.sin(y + k * _HALF_PI)
        if code == 6:
            if k == 0:
                return (params[0] * y + params[1]) * y + params[2]
            if k == 1:
                return 2.0 * params[0] * y + params[1]
            if k == 2:
                return 2.0 * params[0]
            return 0.0
        return math.nan

    @jit
    def lam_value(code, params, t):
        if code == 0:
            return 0.0
        if code == 1:
            return params[0]
        if code == 2:
            return params[0] * math.sin(params[1] * t + params[2])
        return math.nan

    @jit
    def rk4_field_dense(code, params, y_start, t_start, h_seg,
                        n_cells, m_sub, lam_code, lam_params):
        # Classical fixed-step RK4 on dy/dt = f(y, t) + lam(t) * y,
        # returning values at the n_cells + 1 equispaced cell boundaries.
        out = np.empty(n_cells + 1)
        out[0] = y_start
        y = y_start
        dt = h_seg / (n_cells * m_sub)
        step = 0
        for c in range(n_cells):
            for _ in range(m_sub):
                t = t_start + step * dt
                k1 = field_deriv(code, params, y, t, 0) + lam_value(lam_code, lam_params, t) * y
                tm = t + 0.5 * dt
                ym = y + 0.5 * dt * k1
                k2 = field_deriv(code, params, ym, tm, 0) + lam_value(lam_code, lam_params, tm) * ym
                ym = y + 0.5 * dt * k2
                k3 = field_deriv(code, params, ym, tm, 0) + lam_value(lam_code, lam_params, tm) * ym
                te = t + dt
                ye = y + dt * k3
                k4 = field_deriv(code, params, ye, te, 0) + lam_value(lam_code, lam_params, te) * ye
                y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                step += 1
            if not math.isfinite(y):
                for j in range(c + 1, n_cells + 1):
                    out[j] = math.nan
                return out
            out[c + 1] = y
        return out

    @jit
    def rk4_poly_dense(coeffs, anchor, x_start, t_start, h_seg,
                       n_cells, m_sub, lam_code, lam_params):
        # Same stepper for the frozen-coefficient polynomial equation
        # dx/dt = sum_k coeffs[k] * (x - anchor)^k + lam(t) * x.
        # coeffs arrive already divided by k!.
        out = np.empty(n_cells + 1)
        out[0] = x_start
        x = x_start
        deg = coeffs.shape[0] - 1
        dt = h_seg / (n_cells * m_sub)
        step = 0
        for c in range(n_cells):
            for _ in range(m_sub):
                t = t_start + step * dt

                d = x - anchor
                acc = coeffs[deg]
                for i in range(deg - 1, -1, -1):
                    acc = acc * d + coeffs[i]
                k1 = acc + lam_value(lam_code, lam_params, t) * x

                tm = t + 0.5 * dt
                xm = x + 0.5 * dt * k1
                d = xm - anchor
                acc = coeffs[deg]
                for i in range(deg - 1, -1, -1):
                    acc = acc * d + coeffs[i]
                k2 = acc + lam_value(lam_code, lam_params, tm) * xm

                xm = x + 0.5 * dt * k2
                d = xm - anchor
                acc = coeffs[deg]
                for i in range(deg - 1, -1, -1):
                    acc = acc * d + coeffs[i]
                k3 = acc + lam_value(lam_code, lam_params, tm) * xm

                te = t + dt
                xe = x + dt * k3
                d = xe - anchor
                acc = coeffs[deg]
                for i in range(deg - 1, -1, -1):
                    acc = acc * d + coeffs[i]
                k4 = acc + lam_value(lam_code, lam_params, te) * xe

                x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                step += 1
            if not math.isfinite(x):
                for j in range(c + 1, n_cells + 1):
                    out[j] = math.nan
                return out
            out[c + 1] = x
        return out

    @jit
    def grid_sup_abs_deriv(code, params, y_lo, y_hi, t_lo, t_hi, n_y, n_t, k):
        # Sup of |f^(k)| sampled on an n_y x n_t grid over the box.
        best = 0.0
        for i in range(n_y):
            if n_y > 1:
                y = y_lo + (y_hi - y_lo) * i / (n_y - 1)
            else:
                y = y_lo
            for j in range(n_t):
                if n_t > 1:
                    t = t_lo + (t_hi - t_lo) * j / (n_t - 1)
                else:
                    t = t_lo
                v = abs(field_deriv(code, params, y, t, k))
                if not math.isfinite(v):
                    return math.nan
                if v > best:
                    best = v
        return best

    return {
        "field_deriv": field_deriv,
        "lam_value": lam_value,
        "rk4_field_dense": rk4_field_dense,
        "rk4_poly_dense": rk4_poly_dense,
        "grid_sup_abs_deriv": grid_sup_abs_deriv,
    }


_builds: dict[str, dict] = {}
_active: dict = {}
_active_name = ""


def _get_build(name: str) -> dict:
    if name not in _builds:
        if name == "numpy":
            _builds[name] = _build(lambda f: f)
        elif name == "numba":
            from numba import njit

            # cache=False: the kernels close over each other, which the
            # on-disk cache cannot represent. Compilation happens once
            # per process.
            _builds[name] = _build(njit(cache=False, nogil=True))
        else:
            raise ValueError(f"unknown backend {name!r}")
    return _builds[name]


def set_backend(name: str) -> None:
    """Select the active kernel backend, 'numba' or 'numpy'."""
    global _active, _active_name
    _active = _get_build(name)
    _active_name = name


def active_backend() -> str:
    return _active_name


def _default_backend() -> str:
    flag = os.environ.get(ENV_FLAG, "").strip().lower()
    if flag in {"1", "true", "yes", "on"}:
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        warnings.warn(
            "numba is not importable, falling back to the plain NumPy backend",
            RuntimeWarning,
            stacklevel=2,
        )
        return "numpy"
    return "numba"


set_backend(_default_backend())


def field_deriv(code, params, y, t, k):
    return _active["field_deriv"](code, params, float(y), float(t), int(k))


def lam_value(code, params, t):
    return _active["lam_value"](code, params, float(t))


def rk4_field_dense(code, params, y_start, t_start, h_seg, n_cells, m_sub,
                    lam_code, lam_params):
    return _active["rk4_field_dense"](code, params, float(y_start), float(t_start),
                                      float(h_seg), int(n_cells), int(m_sub),
                                      lam_code, lam_params)


def rk4_poly_dense(coeffs, anchor, x_start, t_start, h_seg, n_cells, m_sub,
                   lam_code, lam_params):
    return _active["rk4_poly_dense"](coeffs, float(anchor), float(x_start),
                                     float(t_start), float(h_seg), int(n_cells),
                                     int(m_sub), lam_code, lam_params)


def grid_sup_abs_deriv(code, params, y_lo, y_hi, t_lo, t_hi, n_y, n_t, k):
    return _active["grid_sup_abs_deriv"](code, params, float(y_lo), float(y_hi),
                                         float(t_lo), float(t_hi), int(n_y),
                                         int(n_t), int(k))


NO_PARAMS = np.zeros(3, dtype=np.float64)


def pack_params(values) -> np.ndarray:
    """Pad a parameter tuple into the fixed float64 layout kernels expect."""
    out = np.zeros(max(3, len(values)), dtype=np.float64)
    for i, v in enumerate(values):
        out[i] = float(v)
    return out
