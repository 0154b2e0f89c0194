"""Quaternion-form observer/controller tests: the correction-axis sign
resolution, cross-form equivalence against the matrix implementation,
norm maintenance, and double-cover invariance."""

from __future__ import annotations

import numpy as np
import pytest

from navsim import liegroup as lg
from navsim.controller import (ControlErrors, ControllerGains,
                               DesiredAttitude, torque)
from navsim.dynamics import VehicleParams
from navsim.observer import (ObserverGains, ObserverState,
                             angular_velocity_step, correction_factors,
                             predict_correct_step)
from navsim.quatvariant import (QuatErrors, QuatObserverState,
                                quat_attitude_step, quat_corrections,
                                quat_errors, quat_observer_step, quat_pa_vex,
                                quat_torque)
from navsim.sensing import ReconstructedPose
from util import random_quat, random_rotation

PARAMS = VehicleParams(m=2.5, J=np.diag([0.14, 0.2, 0.12]))
OGAINS = ObserverGains()
CGAINS = ControllerGains()


def random_quat_state(rng) -> QuatObserverState:
    return QuatObserverState(Q_hat=random_quat(rng),
                             Omega_hat=rng.normal(size=3),
                             P_hat=rng.normal(size=3),
                             V_hat=rng.normal(size=3))


def test_state_requires_unit_quaternion():
    with pytest.raises(ValueError):
        QuatObserverState(Q_hat=np.array([1.0, 0.2, 0.0, 0.0]),
                          Omega_hat=np.zeros(3), P_hat=np.zeros(3),
                          V_hat=np.zeros(3))


def test_correction_axis_sign_resolution():
    # The axis read off the quaternion must equal vex(P_a(.)) of the
    # rotation it encodes; the opposite sign would reverse the attitude
    # feedback.
    rng = np.random.default_rng(0)
    for _ in range(200):
        q = random_quat(rng)
        np.testing.assert_allclose(quat_pa_vex(q),
                                   lg.pa_vex(lg.quat_to_rotation(q)),
                                   atol=1e-13)


def test_error_composition_matches_matrix_errors():
    rng = np.random.default_rng(1)
    for _ in range(100):
        q_hat, q_y, q_d = (random_quat(rng) for _ in range(3))
        e = quat_errors(q_hat, q_y, q_d)
        r_hat = lg.quat_to_rotation(q_hat)
        np.testing.assert_allclose(lg.quat_to_rotation(e.Q_tilde_o),
                                   lg.quat_to_rotation(q_y) @ r_hat.T,
                                   atol=1e-13)
        np.testing.assert_allclose(lg.quat_to_rotation(e.Q_tilde_c),
                                   r_hat @ lg.quat_to_rotation(q_d).T,
                                   atol=1e-13)


def test_corrections_match_matrix_form():
    rng = np.random.default_rng(2)
    for _ in range(50):
        s = random_quat_state(rng)
        q_y = random_quat(rng)
        p_y = rng.normal(size=3)
        thrust = float(rng.uniform(0.0, 30.0))
        w_q = quat_corrections(s, q_y, p_y, thrust, PARAMS, OGAINS)
        mat = ObserverState(R_hat=s.rotation(), Omega_hat=s.Omega_hat,
                            P_hat=s.P_hat, V_hat=s.V_hat)
        pose = ReconstructedPose(R=lg.quat_to_rotation(q_y), P=p_y)
        w_m = correction_factors(pose, mat, thrust, PARAMS, OGAINS)
        for name in ("w_o", "w_Omega", "w_V", "w_a", "R_tilde_o",
                     "P_tilde_o"):
            np.testing.assert_allclose(getattr(w_q, name),
                                       getattr(w_m, name), atol=1e-12)


def test_perfect_estimate_is_a_fixed_point():
    s = QuatObserverState(Q_hat=lg.QUAT_IDENTITY.copy(),
                          Omega_hat=np.zeros(3),
                          P_hat=np.array([1.0, -2.0, 3.0]), V_hat=np.zeros(3))
    hover = PARAMS.m * PARAMS.g
    w = quat_corrections(s, s.Q_hat, s.P_hat, hover, PARAMS, OGAINS)
    np.testing.assert_array_equal(w.w_o, np.zeros(3))
    np.testing.assert_array_equal(w.w_Omega, np.zeros(3))
    np.testing.assert_array_equal(w.w_V, np.zeros(3))
    np.testing.assert_allclose(w.w_a, -PARAMS.g * lg.E3, atol=1e-15)

    out = quat_observer_step(s, s.Q_hat, s.P_hat, hover, PARAMS, OGAINS,
                             1e-3, torque=np.zeros(3))
    np.testing.assert_array_equal(out.Q_hat, s.Q_hat)
    np.testing.assert_allclose(out.P_hat, s.P_hat, atol=1e-14)
    np.testing.assert_allclose(out.V_hat, np.zeros(3), atol=1e-14)
    np.testing.assert_array_equal(out.Omega_hat, np.zeros(3))


def test_exp_attitude_step_matches_matrix_step():
    rng = np.random.default_rng(3)
    for _ in range(50):
        s = random_quat_state(rng)
        q_y = random_quat(rng)
        p_y = rng.normal(size=3)
        thrust = float(rng.uniform(0.0, 30.0))
        out = quat_observer_step(s, q_y, p_y, thrust, PARAMS, OGAINS, 1e-3,
                                 torque=rng.normal(size=3))
        mat = ObserverState(R_hat=s.rotation(), Omega_hat=s.Omega_hat,
                            P_hat=s.P_hat, V_hat=s.V_hat)
        w = correction_factors(ReconstructedPose(R=lg.quat_to_rotation(q_y),
                                                 P=p_y), mat, thrust, PARAMS,
                               OGAINS)
        stepped = predict_correct_step(mat, w, thrust, PARAMS, 1e-3)
        np.testing.assert_allclose(out.rotation(), stepped.R_hat, atol=1e-13)
        np.testing.assert_allclose(out.P_hat, stepped.P_hat, atol=1e-13)
        np.testing.assert_allclose(out.V_hat, stepped.V_hat, atol=1e-13)


def test_euler_attitude_step_is_first_order_consistent():
    rng = np.random.default_rng(4)
    q = random_quat(rng)
    om = np.array([0.7, -0.4, 0.9])
    w = np.array([0.2, 0.1, -0.3])
    gaps = []
    for dt in (2e-3, 1e-3, 5e-4):
        q_exp, _ = quat_attitude_step(q, om, w, dt, "exp")
        q_eul, _ = quat_attitude_step(q, om, w, dt, "euler")
        gaps.append(float(np.linalg.norm(q_exp - q_eul)))
    assert gaps[0] < 1e-5
    # Quadratic local error: halving dt shrinks the gap about 4x.
    assert gaps[0] / gaps[1] > 3.0
    assert gaps[1] / gaps[2] > 3.0


def test_unknown_attitude_mode_rejected():
    with pytest.raises(ValueError):
        quat_attitude_step(lg.QUAT_IDENTITY.copy(), np.zeros(3), np.zeros(3),
                           1e-3, "rk4")


def test_norm_drift_exp_vs_euler():
    # The exponential update drifts only by rounding. The linear update
    # leaves the sphere by dt^2 c^2 / 8 for rate magnitude c, which
    # violates the 1e-10 budget for fast transients; that is why "exp"
    # is the default mode.
    rng = np.random.default_rng(5)
    q = random_quat(rng)
    big = np.array([10.0, -7.0, 4.0])
    _, drift = quat_attitude_step(q, big, 0.5 * big, 1e-3, "exp")
    assert drift <= 1e-10

    c = 1.0
    _, drift_fast = quat_attitude_step(q, np.array([c, 0.0, 0.0]),
                                       np.zeros(3), 1e-3, "euler")
    assert drift_fast == pytest.approx((1e-3 * c) ** 2 / 8.0, rel=0.01)
    assert drift_fast > 1e-10
    c = 0.02
    _, drift_slow = quat_attitude_step(q, np.array([c, 0.0, 0.0]),
                                       np.zeros(3), 1e-3, "euler")
    assert drift_slow <= 1e-10


def test_double_cover_invariance():
    rng = np.random.default_rng(6)
    s = random_quat_state(rng)
    flipped = QuatObserverState(Q_hat=-s.Q_hat, Omega_hat=s.Omega_hat,
                                P_hat=s.P_hat, V_hat=s.V_hat)
    q_y = random_quat(rng)
    p_y = rng.normal(size=3)
    w1 = quat_corrections(s, q_y, p_y, 20.0, PARAMS, OGAINS)
    w2 = quat_corrections(flipped, q_y, p_y, 20.0, PARAMS, OGAINS)
    for name in ("w_o", "w_Omega", "w_V", "w_a", "R_tilde_o", "P_tilde_o"):
        np.testing.assert_array_equal(getattr(w1, name), getattr(w2, name))

    tq = rng.normal(size=3)
    out1 = quat_observer_step(s, q_y, p_y, 20.0, PARAMS, OGAINS, 1e-3,
                              torque=tq)
    out2 = quat_observer_step(flipped, q_y, p_y, 20.0, PARAMS, OGAINS, 1e-3,
                              torque=tq)
    np.testing.assert_allclose(out2.rotation(), out1.rotation(), atol=1e-14)
    np.testing.assert_array_equal(out2.Omega_hat, out1.Omega_hat)
    np.testing.assert_array_equal(out2.P_hat, out1.P_hat)
    np.testing.assert_array_equal(out2.V_hat, out1.V_hat)


def test_long_run_agrees_with_matrix_observer():
    # 5000 clean ticks with the truth held at rest by hover thrust; the
    # quaternion and matrix observers must stay within rounding.
    dt = 1e-3
    truth_r = lg.so3_exp(np.array([0.0, 0.0, 2.0 * np.pi / 3.0]))
    truth_p = np.array([-2.0, -1.0, 0.0])
    hover = PARAMS.m * PARAMS.g
    q_y = lg.rotation_to_quat(truth_r)
    pose = ReconstructedPose(R=truth_r, P=truth_p)

    mat = ObserverState(R_hat=np.eye(3), Omega_hat=np.zeros(3),
                        P_hat=np.zeros(3), V_hat=np.zeros(3))
    quat = QuatObserverState(Q_hat=lg.QUAT_IDENTITY.copy(),
                             Omega_hat=np.zeros(3), P_hat=np.zeros(3),
                             V_hat=np.zeros(3))
    for _ in range(5000):
        w = correction_factors(pose, mat, hover, PARAMS, OGAINS)
        pred = predict_correct_step(mat, w, hover, PARAMS, dt)
        om = angular_velocity_step(pred, w, np.zeros(3), PARAMS, dt)
        mat = ObserverState(R_hat=pred.R_hat, Omega_hat=om,
                            P_hat=pred.P_hat, V_hat=pred.V_hat)
        quat = quat_observer_step(quat, q_y, truth_p, hover, PARAMS, OGAINS,
                                  dt, torque=np.zeros(3))
    assert np.linalg.norm(quat.rotation() - mat.R_hat) <= 1e-6
    np.testing.assert_allclose(quat.P_hat, mat.P_hat, atol=1e-8)
    np.testing.assert_allclose(quat.V_hat, mat.V_hat, atol=1e-8)
    np.testing.assert_allclose(quat.Omega_hat, mat.Omega_hat, atol=1e-8)
    # The run itself must have converged for the comparison to matter.
    assert lg.attitude_distance(truth_r @ mat.R_hat.T) < 1e-3


def test_quat_torque_matches_matrix_form():
    rng = np.random.default_rng(7)
    for _ in range(50):
        q_hat, q_y, q_d = (random_quat(rng) for _ in range(3))
        errs = quat_errors(q_hat, q_y, q_d)
        om_hat = rng.normal(size=3)
        des = DesiredAttitude(Q_d=q_d, R_d=lg.quat_to_rotation(q_d),
                              Omega_d=rng.normal(size=3),
                              Omega_d_dot=rng.normal(size=3))
        got = quat_torque(errs, om_hat, des, PARAMS, CGAINS)
        r_hat = lg.quat_to_rotation(q_hat)
        mat_errs = ControlErrors(R_tilde_c=r_hat @ des.R_d.T,
                                 Omega_tilde_c=np.zeros(3),
                                 P_tilde_c=np.zeros(3),
                                 V_tilde_c=np.zeros(3))
        want = torque(mat_errs, lg.quat_to_rotation(q_y) @ r_hat.T, om_hat,
                      des, PARAMS, CGAINS)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_quat_torque_trivial_and_small_angle():
    des0 = DesiredAttitude(Q_d=lg.QUAT_IDENTITY.copy(), R_d=np.eye(3),
                           Omega_d=np.zeros(3), Omega_d_dot=np.zeros(3))
    idle = QuatErrors(Q_tilde_o=lg.QUAT_IDENTITY.copy(),
                      Q_tilde_c=lg.QUAT_IDENTITY.copy())
    np.testing.assert_array_equal(
        quat_torque(idle, np.zeros(3), des0, PARAMS, CGAINS), np.zeros(3))

    delta = 0.3
    tilt = QuatErrors(Q_tilde_o=lg.QUAT_IDENTITY.copy(),
                      Q_tilde_c=lg.rotation_to_quat(
                          lg.so3_exp(np.array([delta, 0.0, 0.0]))))
    got = quat_torque(tilt, np.zeros(3), des0, PARAMS, CGAINS)
    np.testing.assert_allclose(
        got, CGAINS.k_c1 * np.sin(delta) * np.array([1.0, 0.0, 0.0]),
        atol=1e-12)
