import dataclasses

import numpy as np
import pytest

from etadrc.config import build_sim_config, validate_config
from etadrc.controller import CtrlState, control_value, ctrl_on_trigger, etm2_should_trigger, held_deviation
from etadrc.errors import ContractViolation, DimensionError
from etadrc.gains import DesignGains, dwell_times
from etadrc.simulator import run_trajectory

SEC5 = DesignGains(lambdas=(6, 12, 8), cs=(-1, -2), r=50, theta=7, eps1=1, kappa1=1, eps2=1, kappa2=1)
_, UPS = dwell_times(50, 2)


def test_feedback_gains_sec5():
    np.testing.assert_array_equal(SEC5.feedback_gains, [-49.0, -14.0, -1.0])
    assert control_value([1, 0, 0], SEC5) == -49.0


def test_zero_estimate_zero_control():
    assert control_value(np.zeros(3), SEC5) == 0.0


def test_unit_theta():
    assert control_value([1, 1, 1], dataclasses.replace(SEC5, theta=1.0)) == -4.0


def test_length_mismatch():
    with pytest.raises(DimensionError):
        control_value([1, 2], SEC5)


def test_threshold_value():
    assert SEC5.ctrl_threshold == pytest.approx(50 ** -0.5, rel=1e-15)
    assert abs(SEC5.ctrl_threshold - 0.1414) < 1e-4


def test_trigger_past_dwell():
    st = CtrlState.initial(np.zeros(3), SEC5)
    assert etm2_should_trigger(np.array([0.1, 0.05, 0.05]), st, 1.0, UPS, SEC5)


def test_within_dwell_never_triggers():
    st = CtrlState.initial(np.zeros(3), SEC5)
    assert not etm2_should_trigger(np.array([100.0, 0, 0]), st, 0.5 * UPS, UPS, SEC5)


def test_threshold_inclusive():
    thr = SEC5.kappa2 * SEC5.r ** -0.5
    st = CtrlState.initial(np.zeros(3), SEC5)
    assert etm2_should_trigger(np.array([thr, 0.0, 0.0]), st, 1.0, UPS, SEC5)
    assert not etm2_should_trigger(np.array([np.nextafter(thr, 0), 0.0, 0.0]), st, 1.0, UPS, SEC5)
    assert etm2_should_trigger(np.array([1.0, 0.0, 0.0]), st, UPS, UPS, SEC5)


def test_deviation_is_l1_over_all_components():
    assert held_deviation(np.array([1.0, -2.0, 3.0]), np.zeros(3)) == 6.0


def test_initial_state_holds_estimate():
    x0 = np.array([0.2, -0.1, 0.4])
    st = CtrlState.initial(x0, SEC5)
    assert (st.t_last, st.l) == (0.0, 1)
    assert st.u == control_value(x0, SEC5)


def test_on_trigger_recomputes_control():
    st = CtrlState.initial(np.zeros(3), SEC5)
    new = ctrl_on_trigger(st, np.array([1.0, 0.0, 0.0]), 0.2, SEC5, upsilon=UPS)
    assert (new.t_last, new.l, new.u) == (0.2, 2, -49.0)
    with pytest.raises(ContractViolation):
        ctrl_on_trigger(st, np.array([1e-6, 0.0, 0.0]), 0.2, SEC5, upsilon=UPS)


@pytest.fixture(scope="module")
def fine_run():
    cfg = build_sim_config(validate_config({"sim": {"T": 0.5, "record_stride": 1}}))
    return run_trajectory(cfg)


def test_control_piecewise_constant(fine_run):
    rec, log = fine_run
    idx = np.searchsorted(log.ctrl_times, rec.t, side="right") - 1
    expected = np.array([control_value(log.ctrl_held[k], SEC5) for k in idx])
    np.testing.assert_array_equal(rec.u, expected)
    changes = np.flatnonzero(np.diff(rec.u) != 0) + 1
    assert set(changes) <= set(np.flatnonzero(rec.trig_ctrl))


def test_controller_gaps_respect_dwell(fine_run):
    _, log = fine_run
    assert log.ctrl_times[0] == 0.0
    assert np.all(np.diff(log.ctrl_times) >= log.upsilon)


def test_deviation_bound_between_events(fine_run):
    rec, log = fine_run
    idx = np.searchsorted(log.ctrl_times, rec.t, side="right") - 1
    held = log.ctrl_held[idx]
    dev = np.abs(rec.xhat - held).sum(axis=1)
    since = rec.t - log.ctrl_times[idx]
    quiet = ~rec.trig_ctrl
    # once the dwell has passed, a point without a trigger is below the threshold
    armed = quiet & (since >= log.upsilon)
    assert np.all(dev[armed] < SEC5.ctrl_threshold)
    # inside the dwell the excess is bounded by the growth over one dwell window
    h = rec.t[1] - rec.t[0]
    steps = int(np.ceil(log.upsilon / h)) + 1
    growth = np.abs(np.diff(rec.xhat, axis=0)).sum(axis=1)
    window = np.convolve(growth, np.ones(steps))[: growth.size]
    over = np.flatnonzero(dev[1:] >= SEC5.ctrl_threshold) + 1
    assert np.all(dev[over] < SEC5.ctrl_threshold + window[over - 1] + 1e-12)
