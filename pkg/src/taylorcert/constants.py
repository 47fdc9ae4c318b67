"""Growth constants for the derivative chain on the working box.

The boundedness hypothesis used throughout asks for constants K, K1 with

    sup |f^(j)| <= K * sup |f^(j-1)| + K1      for every j >= 1,

where K < 1 is required whenever K1 > 0 (any K >= 0 is fine when K1 = 0).
Chaining the inequality gives

    sup |f^(k)| <= K^k * F0 + K1 * (1 - K^k) / (1 - K),    F0 = sup |f|.

The estimator below samples the sups on a finite grid and is a heuristic,
not a certificate: reports carry a flag saying exactly that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConstantsInfeasible
from .problems import OdeProblem


def k1_chain(K: float, K1: float, k: int) -> float:
    """The accumulated K1 term K1 * (1 - K^k) / (1 - K), zero when K1 = 0."""
    if K1 == 0.0:
        return 0.0
    if K >= 1.0:
        raise ConstantsInfeasible("K must be below 1 when K1 is positive")
    return K1 * (1.0 - K ** k) / (1.0 - K)


@dataclass(frozen=True)
class BoundConstants:
    """Constants (K, K1) plus the sampled sup chain they were fit to."""

    K: float
    K1: float
    F0: float
    derivative_sups: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.K < 0 or self.K1 < 0 or self.F0 < 0:
            raise ValueError("constants must be nonnegative")
        if self.K1 > 0 and self.K >= 1.0:
            raise ValueError("K must be below 1 whenever K1 is positive")
        tol = 1e-9 * (1.0 + self.F0 + self.K1)
        for k, s in enumerate(self.derivative_sups):
            if s > self.chain_bound(k) + tol:
                raise ValueError(
                    f"sampled sup of order {k} breaks the growth chain: "
                    f"{s} > {self.chain_bound(k)}"
                )

    def chain_bound(self, k: int) -> float:
        """Certified bound on sup |f^(k)|: K^k F0 + K1 (1 - K^k)/(1 - K)."""
        return (self.K ** k) * self.F0 + k1_chain(self.K, self.K1, k)

    def describe(self) -> dict:
        return {
            "K": self.K,
            "K1": self.K1,
            "F0": self.F0,
            "derivative_sups": [float(s) for s in self.derivative_sups],
        }


def _sampled_sups(problem: OdeProblem, k_max: int, grid_density: int) -> np.ndarray:
    sups = np.empty(k_max + 1, dtype=np.float64)
    spec = problem.field
    if spec.is_builtin:
        for k in range(k_max + 1):
            sups[k] = _kernels.grid_sup_abs_deriv(
                spec.code, spec.params, problem.y_lo, problem.y_hi,
                problem.t0, problem.t_end, grid_density, grid_density, k,
            )
    else:
        ys = np.linspace(problem.y_lo, problem.y_hi, grid_density)
        ts = np.linspace(problem.t0, problem.t_end, grid_density)
        for k in range(k_max + 1):
            best = 0.0
            for y in ys:
                for t in ts:
                    v = abs(spec.derivative(float(y), float(t), k))
                    if not math.isfinite(v):
                        best = math.nan
                        break
                    if v > best:
                        best = v
                if not math.isfinite(best):
                    break
            sups[k] = best
    return sups


def _select_constants(sups: np.ndarray) -> tuple[float, float]:
    # Prefer K1 = 0 (which keeps every downstream chain term a pure power),
    # then the smallest K that works; the exact ratio max_j S_j / S_{j-1}
    # joins a uniform 1000-point K grid over [0, 1) as a candidate.
    if not np.all(np.isfinite(sups)):
        raise ConstantsInfeasible("sampled sups are not finite on the box")
    if np.all(sups == 0.0):
        return 0.0, 0.0

    r_star = 0.0
    for j in range(1, len(sups)):
        if sups[j - 1] > 0.0:
            r_star = max(r_star, sups[j] / sups[j - 1])
        elif sups[j] > 0.0:
            r_star = math.inf

    candidates = [i / 1000.0 for i in range(1000)]
    if math.isfinite(r_star):
        candidates.append(float(r_star))

    tol = 1e-12 * (1.0 + float(sups.max()))
    best = None
    for K in candidates:
        K1 = 0.0
        for j in range(1, len(sups)):
            K1 = max(K1, sups[j] - K * sups[j - 1])
        if K1 < tol:
            K1 = 0.0
        if K1 > 0.0 and K >= 1.0:
            continue
        key = (K1, K)
        if best is None or key < best:
            best = key
    if best is None:
        raise ConstantsInfeasible(
            "no admissible (K, K1) with K < 1 found on the candidate grid"
        )
    return best[1], best[0]


def estimate_constants(problem: OdeProblem, k_max: int,
                       grid_density: int = 101) -> BoundConstants:
    """Fit (K, K1) to grid-sampled sup norms of f and its y-derivatives.

    Samples S_j = max |f^(j)| on a grid_density x grid_density grid over
    the box for j = 0 .. k_max, then picks the (K, K1) pair with the least
    K1, breaking ties by the least K. Heuristic by construction: a finer
    grid can only raise the sampled sups.
    """
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    if grid_density < 2:
        raise ValueError("grid_density must be at least 2")
    if k_max > problem.smoothness_order:
        raise ConstantsInfeasible(
            f"k_max={k_max} exceeds the declared smoothness order "
            f"{problem.smoothness_order}"
        )
    sups = _sampled_sups(problem, k_max, grid_density)
    K, K1 = _select_constants(sups)
    return BoundConstants(K=K, K1=K1, F0=float(sups[0]),
                          derivative_sups=tuple(float(s) for s in sups))
