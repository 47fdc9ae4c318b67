"""Segment flows, truncated and reference integration, error bookkeeping."""

import math

import numpy as np
import pytest

from taylorcert import (
    BlowUp,
    DomainMismatch,
    OdeProblem,
    OracleUnreliable,
    PerturbationSpec,
    SamplingSequence,
    error_trajectory,
    eval_derivatives,
    integrate_reference,
    integrate_truncated,
    local_flow,
    make_field,
    make_lambda,
    segment_deviation_probe,
)


def _problem(field, y0=0.0, theta=1.0, t0=0.0, t_end=1.0, n=4, **params):
    return OdeProblem(field=make_field(field, **params), y0=y0, t0=t0,
                      t_end=t_end, theta=theta, smoothness_order=n)


# --------------------------------------------------------------- local flow

def test_local_flow_order0_drift():
    p = _problem("constant", value=2.0)
    stack = eval_derivatives(p, 1.0, 0.0, 0)
    ts, xs = local_flow(stack, 1.0, 0.0, 0.5)
    assert xs[-1] == pytest.approx(2.0, abs=0)
    np.testing.assert_allclose(xs, 1.0 + 2.0 * ts, rtol=0, atol=0)


def test_local_flow_order1_exponential():
    p = _problem("affine", a=-1.0, b=0.0)
    stack = eval_derivatives(p, 1.0, 0.0, 1)
    ts, xs = local_flow(stack, 1.0, 0.0, 1.0)
    assert xs[-1] == pytest.approx(math.exp(-1.0), rel=1e-14)
    np.testing.assert_allclose(xs, np.exp(-ts), rtol=1e-13, atol=1e-15)


def test_local_flow_riccati_exact_truncation():
    # f = y^2 at x_i = 1: the order-2 truncation reproduces the field, so
    # the segment flow is 1/(1-t) and reaches 2 at t = 0.5
    p = _problem("quadratic", a=1.0, b=0.0, c=0.0, y0=1.0)
    stack = eval_derivatives(p, 1.0, 0.0, 2)
    ts, xs = local_flow(stack, 1.0, 0.0, 0.5)
    assert xs[-1] == pytest.approx(2.0, rel=1e-9)
    np.testing.assert_allclose(xs, 1.0 / (1.0 - ts), rtol=1e-8)


def test_local_flow_degenerate_rate_falls_back():
    # a_1 below the degeneracy cutoff: the sub-stepped path must still
    # produce the plain drift
    p = _problem("affine", a=1e-15, b=1.0)
    stack = eval_derivatives(p, 0.0, 0.0, 1)
    ts, xs = local_flow(stack, 0.0, 0.0, 0.5)
    np.testing.assert_allclose(xs, ts, rtol=1e-10, atol=1e-12)


def test_local_flow_blowup():
    # past the Riccati singularity the polynomial flow escapes
    p = _problem("quadratic", a=1.0, b=0.0, c=0.0, y0=2.0, theta=1.0)
    stack = eval_derivatives(p, 2.0, 0.0, 2)
    with pytest.raises(BlowUp):
        local_flow(stack, 2.0, 0.0, 1.0)


def test_local_flow_with_constant_rate():
    # zero field plus rate lambda: dx/dt = lam * x
    p = _problem("zero")
    stack = eval_derivatives(p, 1.0, 0.0, 0)
    lam = make_lambda("constant", value=0.5)
    ts, xs = local_flow(stack, 1.0, 0.0, 1.0, lam=lam)
    assert xs[-1] == pytest.approx(math.exp(0.5), rel=1e-10)


# ------------------------------------------------------- truncated equation

def test_euler_iterates_at_order_zero():
    p = _problem("logistic", y0=0.5, theta=0.4, t_end=1.0, n=3)
    seq = SamplingSequence.uniform(0.0, 1.0, 10)
    traj = integrate_truncated(p, seq, 0, 0.5)
    assert traj.sample_pre[1] == pytest.approx(0.525, abs=1e-15)
    x = 0.5
    for i in range(10):
        x = x + 0.1 * x * (1.0 - x)
        assert traj.sample_post[i + 1] == pytest.approx(x, abs=1e-12)


def test_affine_truncation_is_exact():
    p = _problem("affine", a=-1.0, b=0.0, y0=1.0, t_end=2.0)
    seq = SamplingSequence.from_points([0.0, 0.3, 0.8, 1.4, 2.0])
    traj = integrate_truncated(p, seq, 1, 1.0)
    ts, xs, _, _ = traj.dense_arrays()
    np.testing.assert_allclose(xs, np.exp(-ts), rtol=1e-12, atol=1e-14)


def test_impulse_bookkeeping():
    p = _problem("zero", t_end=0.3)
    seq = SamplingSequence.uniform(0.0, 0.3, 3)
    pert = PerturbationSpec(impulses=np.array([0.01, -0.02, 0.03]),
                            impulse_cap=0.03)
    traj = integrate_truncated(p, seq, 0, 0.0, perturbation=pert)
    jumps = traj.sample_post - traj.sample_pre
    np.testing.assert_allclose(jumps, [0.0, 0.01, -0.02, 0.03], atol=1e-16)
    # zero field: each segment is flat at the post-jump value
    assert traj.seg_values[1][0] == pytest.approx(0.01, abs=0)
    assert traj.seg_values[2][0] == pytest.approx(-0.01, abs=1e-16)
    assert traj.sample_post[3] == pytest.approx(0.02, abs=1e-16)


def test_scalar_impulse_applies_every_point():
    p = _problem("zero", t_end=0.2)
    seq = SamplingSequence.uniform(0.0, 0.2, 2)
    traj = integrate_truncated(p, seq, 0, 0.0,
                               perturbation=PerturbationSpec(impulses=0.05))
    np.testing.assert_allclose(traj.sample_post, [0.0, 0.05, 0.10],
                               rtol=0, atol=1e-16)


def test_zero_perturbation_is_bitwise_identical():
    p = _problem("logistic", y0=0.3, theta=0.4, t_end=0.5, n=3)
    seq = SamplingSequence.uniform(0.0, 0.5, 4)
    plain = integrate_truncated(p, seq, 2, 0.3)
    pert = integrate_truncated(
        p, seq, 2, 0.3,
        perturbation=PerturbationSpec(impulses=0.0, impulse_cap=0.0))
    for a, b in zip(plain.seg_values, pert.seg_values):
        assert np.array_equal(a, b)
    assert np.array_equal(plain.sample_post, pert.sample_post)


def test_trajectory_csv_and_interpolation(tmp_path):
    p = _problem("affine", a=-1.0, b=0.0, y0=1.0, t_end=0.4)
    seq = SamplingSequence.uniform(0.0, 0.4, 2)
    traj = integrate_truncated(p, seq, 1, 1.0)
    path = tmp_path / "traj.csv"
    traj.to_csv(str(path))
    header = path.read_text().splitlines()[0]
    assert header == "t,value,segment_index,post_jump"
    assert traj.value(0.2) == pytest.approx(math.exp(-0.2), rel=1e-9)


# ------------------------------------------------------------------- oracle

def test_reference_zero_field_exact():
    p = _problem("constant", value=0.0, y0=0.7)
    seq = SamplingSequence.uniform(0.0, 1.0, 2)
    traj = integrate_reference(p, seq, 0.7)
    ts, ys, _, _ = traj.dense_arrays()
    assert np.all(ys == 0.7)
    assert traj.oracle_rel_err == 0.0
    assert not traj.oracle_flagged


def test_reference_affine_endpoint():
    p = _problem("affine", a=-1.0, b=0.0, y0=1.0)
    seq = SamplingSequence.uniform(0.0, 1.0, 1)
    traj = integrate_reference(p, seq, 1.0)
    assert traj.sample_post[-1] == pytest.approx(math.exp(-1.0), abs=1e-10)


def test_reference_logistic_endpoint():
    p = _problem("logistic", y0=0.5, theta=0.4)
    seq = SamplingSequence.uniform(0.0, 1.0, 1)
    traj = integrate_reference(p, seq, 0.5)
    want = 1.0 / (1.0 + math.exp(-1.0))
    assert traj.sample_post[-1] == pytest.approx(want, abs=1e-9)


def test_reference_unreliable_oracle_raises():
    # deliberately starved step count on a fast problem
    p = _problem("affine", a=100.0, b=0.0, y0=1.0, theta=200.0)
    seq = SamplingSequence.uniform(0.0, 1.0, 1)
    with pytest.raises(OracleUnreliable):
        integrate_reference(p, seq, 1.0, substeps_per_unit=1000)


def test_reference_flag_band_consistency():
    p = _problem("affine", a=100.0, b=0.0, y0=1.0, theta=200.0)
    seq = SamplingSequence.uniform(0.0, 1.0, 1)
    for sub in (20_000, 100_000):
        traj = integrate_reference(p, seq, 1.0, substeps_per_unit=sub)
        assert traj.oracle_flagged == (traj.oracle_rel_err >= 1e-9)


def test_reference_with_rate_forcing():
    # zero field with lambda = 0.5 gives pure exponential growth
    p = _problem("zero", y0=1.0)
    seq = SamplingSequence.uniform(0.0, 1.0, 2)
    lam = make_lambda("constant", value=0.5)
    traj = integrate_reference(p, seq, 1.0, perturbation_lambda=lam)
    assert traj.sample_post[-1] == pytest.approx(math.exp(0.5), abs=1e-10)


# ---------------------------------------------------------------- error arc

def test_error_trajectory_identical_inputs():
    p = _problem("logistic", y0=0.4, theta=0.4, t_end=0.5, n=3)
    seq = SamplingSequence.uniform(0.0, 0.5, 2)
    traj = integrate_truncated(p, seq, 2, 0.4)
    err = error_trajectory(traj, traj)
    assert err.max_abs == 0.0
    assert err.max_interval_dev == 0.0
    assert err.max_dev_from_start == 0.0


def test_error_trajectory_affine_offset():
    p = _problem("affine", a=-1.0, b=0.0, y0=1.0, theta=0.5, t_end=1.0)
    seq = SamplingSequence.uniform(0.0, 1.0, 4)
    ref = integrate_reference(p, seq, 1.0)
    approx = integrate_truncated(p, seq, 1, 1.1)
    err = error_trajectory(ref, approx)
    ts, es, _, _ = err.dense_arrays()
    np.testing.assert_allclose(es, -0.1 * np.exp(-ts), rtol=1e-7, atol=1e-10)
    assert err.sample_post[0] == pytest.approx(-0.1)
    assert err.max_abs == pytest.approx(0.1, rel=1e-7)


def test_error_trajectory_grid_mismatch():
    p = _problem("zero")
    a = integrate_truncated(p, SamplingSequence.uniform(0.0, 1.0, 2), 0, 0.0)
    b = integrate_truncated(p, SamplingSequence.uniform(0.0, 1.0, 3), 0, 0.0)
    with pytest.raises(DomainMismatch):
        error_trajectory(a, b)


def test_error_interval_dev_sees_terminal_jump():
    # an impulse at the last sampling point must count toward the
    # per-interval deviation even though no segment follows it
    p = _problem("zero", t_end=0.2)
    seq = SamplingSequence.uniform(0.0, 0.2, 2)
    pert = PerturbationSpec(impulses=np.array([0.0, 0.04]), impulse_cap=0.04)
    approx = integrate_truncated(p, seq, 0, 0.0, perturbation=pert)
    ref = integrate_reference(p, seq, 0.0)
    err = error_trajectory(ref, approx)
    assert err.max_interval_dev == pytest.approx(0.04, abs=1e-15)


# -------------------------------------------------------------------- probe

def test_segment_probe_tracks_deviation():
    p = _problem("affine", a=-1.0, b=0.0, y0=1.0, theta=0.5, t_end=1.0)
    probe = segment_deviation_probe(p, 1, 1.0)
    dev = probe(0.0, 0.5)
    assert dev(0.0) == pytest.approx(0.0, abs=1e-12)
    # the flow decays from 1, so the deviation is 1 - e^{-t}
    assert dev(0.5) == pytest.approx(1.0 - math.exp(-0.5), rel=1e-6)
    # a later call re-anchors at the committed state
    dev2 = probe(0.5, 1.0)
    assert dev2(0.5) == pytest.approx(0.0, abs=1e-12)
    assert dev2(1.0) == pytest.approx(
        math.exp(-0.5) - math.exp(-1.0), rel=1e-6)


def test_segment_probe_joint_with_reference():
    p = _problem("affine", a=-1.0, b=0.0, y0=1.0, theta=0.5, t_end=1.0)
    probe = segment_deviation_probe(p, 1, 1.0, y0=1.0)
    dev = probe(0.0, 0.4)
    # x and y coincide for the exact truncation, so the joint deviation
    # still equals the single-flow one
    assert dev(0.4) == pytest.approx(1.0 - math.exp(-0.4), rel=1e-6)


def test_segment_probe_rejects_backward_calls():
    p = _problem("zero")
    probe = segment_deviation_probe(p, 0, 0.0)
    probe(0.0, 0.4)
    probe(0.4, 0.8)
    with pytest.raises(ValueError):
        probe(0.2, 0.3)
