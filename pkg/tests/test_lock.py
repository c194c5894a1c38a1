import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgopo import lock
from wgopo.reproduce import lock_peak_rate, run_lock


@pytest.fixture(scope="module")
def trace(default_context):
    return run_lock(default_context)


def test_setpoint_fraction_from_penalty():
    assert lock.SETPOINT_FRACTION == pytest.approx(10 ** -0.24)
    assert lock.SETPOINT_FRACTION == pytest.approx(0.575, rel=2e-3)


def test_drift_held_below_millikelvin(trace):
    assert trace.max_excursion(300.0) < 1e-3


def test_locked_throughput(trace):
    assert trace.mean_rate(300.0) / trace.peak_rate == pytest.approx(0.575, rel=0.02)


def test_unlocked_drift_walks_away(default_context):
    fringe = lock.lorentzian_fringe(128.58, 6000.0)
    t = lock.simulate_lock(fringe, duration=900.0, gains=(0.0, 0.0, 0.0))
    assert t.max_excursion(300.0) > 0.1


def test_peak_rate_matches_prediction(default_context):
    assert lock_peak_rate(default_context.cfg) == pytest.approx(6020, rel=0.02)


def make_state(kp=0.0, ki=0.0, kd=0.0):
    return lock.LockState(setpoint=1000.0, kp=kp, ki=ki, kd=kd, heater=0.0, base_temperature=0.0)


def test_zero_gains_give_zero_command():
    state = make_state()
    for measured in (0.0, 500.0, 1000.0, 4000.0):
        state, offset = lock.lock_step(state, measured, 0.1)
        assert offset == 0.0


def test_non_positive_dt_rejected():
    with pytest.raises(ValueError):
        lock.lock_step(make_state(), 1.0, 0.0)


def test_non_finite_measurement_holds_state():
    state = make_state(kp=1.0)
    new, offset = lock.lock_step(state, float("nan"), 0.1)
    assert new == state and offset == 0.0


def test_integrator_is_clamped():
    state = make_state(ki=1.0)
    for _ in range(10_000):
        state, _ = lock.lock_step(state, 0.0, 1.0)
    assert state.integrator == state.integrator_limit


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(1e-3, 10.0), st.floats(0.0, 2.0))
def test_proportional_term_is_linear_in_error(measured, dt, kp):
    state = make_state(kp=kp)
    _, offset = lock.lock_step(state, measured, dt)
    assert offset == pytest.approx(kp * (1000.0 - measured) / 1000.0, rel=1e-12, abs=1e-12)


def test_lock_point_on_requested_side():
    fringe = lock.lorentzian_fringe(100.0, 5000.0)
    lo = fringe.lock_point(0.575, side=-1)
    hi = fringe.lock_point(0.575, side=+1)
    assert lo < 100.0 < hi
    assert float(fringe.rate(lo)) == pytest.approx(0.575 * 5000.0, rel=1e-6)
    # Lorentzian oracle: half width times sqrt(1/f - 1)
    assert 100.0 - lo == pytest.approx(0.0213 / 2 * math.sqrt(1 / 0.575 - 1), rel=1e-4)


def test_lock_deterministic(default_context):
    a, b = run_lock(default_context), run_lock(default_context)
    assert np.array_equal(a.counts, b.counts)
