"""Growth-chain constants: selection, validation, chained bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taylorcert import (
    BoundConstants,
    ConstantsInfeasible,
    OdeProblem,
    estimate_constants,
    k1_chain,
    make_field,
)

from reference_formulas import chain_bound as ref_chain


def _problem(field, y0=0.0, theta=1.0, t_end=1.0, n=4, **params):
    return OdeProblem(field=make_field(field, **params), y0=y0, t0=0.0,
                      t_end=t_end, theta=theta, smoothness_order=n)


def test_k1_chain_values():
    assert k1_chain(0.5, 0.0, 3) == 0.0
    assert k1_chain(0.5, 0.1, 1) == pytest.approx(0.1, rel=1e-15)
    assert k1_chain(0.5, 0.1, 2) == pytest.approx(0.15, rel=1e-15)
    with pytest.raises(ConstantsInfeasible):
        k1_chain(1.0, 0.1, 2)


def test_bound_constants_validation():
    with pytest.raises(ValueError):
        BoundConstants(K=-0.1, K1=0.0, F0=1.0)
    with pytest.raises(ValueError):
        BoundConstants(K=1.0, K1=0.5, F0=1.0)
    with pytest.raises(ValueError):
        # sampled sup of order 1 breaks the chain K^1 F0 = 0.5
        BoundConstants(K=0.5, K1=0.0, F0=1.0, derivative_sups=(1.0, 0.9))
    ok = BoundConstants(K=0.5, K1=0.0, F0=1.0, derivative_sups=(1.0, 0.5))
    assert ok.chain_bound(2) == pytest.approx(0.25)


@settings(max_examples=80, deadline=None)
@given(
    K=st.floats(0.0, 0.95),
    K1=st.floats(0.0, 1.0),
    F0=st.floats(0.0, 5.0),
    k=st.integers(0, 8),
)
def test_chain_bound_matches_reference(K, K1, F0, k):
    c = BoundConstants(K=K, K1=K1, F0=F0)
    assert c.chain_bound(k) == pytest.approx(ref_chain(K, K1, F0, k),
                                             rel=1e-12, abs=1e-12)


def test_estimate_zero_field():
    c = estimate_constants(_problem("zero"), k_max=3)
    assert (c.K, c.K1, c.F0) == (0.0, 0.0, 0.0)


def test_estimate_affine_unit_box():
    # f = -y on [-1, 1]: sups are (1, 1, 0, ...), so K = 1 with K1 = 0
    c = estimate_constants(_problem("affine", a=-1.0, b=0.0), k_max=3)
    assert c.F0 == pytest.approx(1.0, rel=1e-12)
    assert c.K == pytest.approx(1.0, rel=1e-12)
    assert c.K1 == 0.0


def test_estimate_scaled_sine():
    # f = 0.5 sin(y) on [-pi, pi]: every derivative sup is 0.5
    c = estimate_constants(_problem("sine", amplitude=0.5, theta=math.pi),
                           k_max=4)
    assert c.F0 == pytest.approx(0.5, rel=1e-12)
    assert c.K == pytest.approx(1.0, rel=1e-12)
    assert c.K1 == 0.0


def test_estimated_constants_dominate_sampled_sups():
    for name, params, theta in (
        ("logistic", {}, 0.3),
        ("damped_driven", {}, 0.6),
        ("sine", {"amplitude": 0.1}, 0.5),
        ("quadratic", {"a": 0.5, "b": -1.0, "c": 0.2}, 0.4),
    ):
        p = _problem(name, y0=0.05, theta=theta, **params)
        c = estimate_constants(p, k_max=3)
        for k, s in enumerate(c.derivative_sups):
            assert s <= c.chain_bound(k) + 1e-9 * (1.0 + c.F0 + c.K1)


def test_estimate_prefers_zero_k1():
    # K1 = 0 must win whenever a pure power chain fits the sups.
    c = estimate_constants(_problem("sine", amplitude=0.1, y0=0.05,
                                    theta=0.5), k_max=3)
    assert c.K1 == 0.0
    assert c.K > 1.0  # ratio of cos sup to the small sin sup on the box


def test_estimate_grid_density_is_stable():
    p = _problem("logistic", y0=0.05, theta=0.3)
    c1 = estimate_constants(p, k_max=3, grid_density=101)
    c2 = estimate_constants(p, k_max=3, grid_density=301)
    # denser grids may only see slightly larger sups
    assert c2.F0 >= c1.F0 - 1e-12
    assert abs(c1.F0 - c2.F0) < 1e-3
