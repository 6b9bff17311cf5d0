"""Admittance error dynamics against closed-form oracles."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudotactile.admittance import (
    AdmittanceParams,
    AdmittanceState,
    DesiredPoint,
    Wrench,
    admittance_step,
    compliant_point,
    spring_offset,
)

CRIT = AdmittanceParams.uniform(1.0, 20.0, 100.0)


def critically_damped(t, f=10.0, k=100.0, w=10.0):
    """Closed-form step response of m=1, d=2w, k=w^2 from rest."""
    return (f / k) * (1.0 - math.exp(-w * t) * (1.0 + w * t))


def max_oracle_error(dt, substeps, duration=2.0):
    s = AdmittanceState()
    f = Wrench((10.0, 0.0, 0.0))
    err = 0.0
    for k in range(1, int(round(duration / dt)) + 1):
        s = admittance_step(CRIT, s, f, dt, substeps)
        err = max(err, abs(s.x_c[0] - critically_damped(k * dt)))
    return err


def settle(params, wrench, dt=0.01, n=4000):
    s = AdmittanceState()
    for _ in range(n):
        s = admittance_step(params, s, wrench, dt)
    return s


def test_zero_wrench_keeps_desired_exactly():
    params = AdmittanceParams()
    s = AdmittanceState()
    desired = DesiredPoint(np.array([0.3, 0.1, 0.2, 0.0, 0.1, 0.0]))
    for _ in range(200):
        s = admittance_step(params, s, Wrench(), 0.05)
        x_c, _, _ = compliant_point(desired, s, params, Wrench())
        assert np.array_equal(x_c, desired.x_d)


def test_steady_state_offset():
    params = AdmittanceParams.uniform(1.0, 20.0, 100.0)
    s = settle(params, Wrench((10.0, 0.0, 0.0)))
    assert abs(s.x_c[0] - 0.1) <= 1e-6
    assert np.all(np.abs(s.x_c[1:]) <= 1e-12)


def test_critically_damped_oracle():
    assert max_oracle_error(0.001, 10) <= 1e-4


def test_first_order_convergence():
    coarse = max_oracle_error(0.002, 1)
    fine = max_oracle_error(0.001, 1)
    assert coarse / fine >= 1.9


def test_spring_offset_examples():
    assert np.array_equal(spring_offset(AdmittanceParams(), Wrench()), np.zeros(6))
    off = spring_offset(AdmittanceParams.uniform(1.0, 20.0, 100.0), Wrench((10.0, 0.0, 0.0)))
    assert np.allclose(off, [0.1, 0, 0, 0, 0, 0], atol=0, rtol=1e-15)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        admittance_step(AdmittanceParams(), AdmittanceState(), Wrench(), 0.2)
    with pytest.raises(ValueError):
        admittance_step(AdmittanceParams(), AdmittanceState(), Wrench(), 0.0)
    with pytest.raises(ValueError):
        Wrench((math.inf, 0.0, 0.0))
    with pytest.raises(ValueError):
        AdmittanceParams.uniform(1.0, 0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(50.0, 1000.0), min_size=6, max_size=6),
    st.lists(st.floats(-20.0, 20.0), min_size=3, max_size=3),
    st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3),
)
def test_prop_settles_to_spring_offset(k, force, torque):
    k = np.array(k)
    # damping ratio 1 on every axis keeps the settling time short
    params = AdmittanceParams(np.ones(6), 2.0 * np.sqrt(k), k)
    w = Wrench(force, torque)
    s = settle(params, w, dt=0.01, n=600)
    assert np.max(np.abs(s.x_c - spring_offset(params, w))) <= 1e-5


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-20.0, 20.0), min_size=3, max_size=3))
def test_prop_convergence_monotone_tail(force):
    params = AdmittanceParams.uniform(1.0, 40.0, 400.0)
    w = Wrench(force)
    target = spring_offset(params, w)
    s = AdmittanceState()
    errs = []
    for _ in range(400):
        s = admittance_step(params, s, w, 0.01)
        errs.append(np.linalg.norm(s.x_c - target))
    tail = errs[100:]
    assert all(b <= a + 1e-15 for a, b in zip(tail, tail[1:]))
    assert errs[-1] < 1e-6


def test_stiff_limit_recovers_rigid_tracking():
    params = AdmittanceParams.uniform(1.0, 2000.0, 1e6)
    # the substep must resolve the 1000 rad/s natural frequency
    s = settle(params, Wrench((10.0, -5.0, 3.0), (1.0, 0.0, 0.0)), dt=0.001, n=500)
    assert np.max(np.abs(s.x_c)) <= 1e-5


@settings(max_examples=40, deadline=None)
@given(st.floats(-20.0, 20.0), st.sampled_from([0.001, 0.005, 0.01]))
def test_prop_equation_residual(force, dt):
    # finite differences of the trajectory substituted into the error equation
    params = CRIT
    w = Wrench((force, 0.0, 0.0))
    s = AdmittanceState()
    for _ in range(200):
        n = admittance_step(params, s, w, dt, substeps=1)
        acc = (n.xdot_c - s.xdot_c) / dt
        vel = (n.x_c - s.x_c) / dt
        resid = params.mass * acc + params.damping * vel + params.stiffness * n.x_c - w.as_array()
        assert np.max(np.abs(resid)) <= 1000.0 * dt * (abs(force) + 1.0)
        s = n
