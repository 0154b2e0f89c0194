"""Quaternion form of the attitude observer and the torque law.

The rotation-matrix implementations in `observer` and `controller` are
normative. This module carries the attitude estimate on the unit
quaternion sphere instead, with the translation and angular-velocity
updates delegated to the matrix form's discrete steps applied to the
rotation the quaternion encodes, so both forms see the same
integration scheme and stay within rounding of each other.

Convention: quaternions are scalar-first, composition is the Hamilton
product, and a product a * b encodes the rotation R(b) @ R(a). Under
this convention the attitude-correction axis vex(P_a(R(q))) equals
-2 q0 q_vec; the opposite sign reverses the attitude feedback and is
rejected by the cross-form equivalence tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import liegroup as lg
from .controller import ControllerGains, DesiredAttitude
from .dynamics import VehicleParams
from .liegroup import E3
from .observer import (CorrectionTerms, ObserverGains, ObserverState,
                       angular_velocity_step, predict_correct_step)

ATTITUDE_UPDATE_MODES = ("exp", "euler")


@dataclass(frozen=True)
class QuatObserverState:
    """Observer estimate with the attitude stored as a unit quaternion.

    norm_drift records |norm - 1| of the raw attitude update that
    produced this state, measured before renormalization.
    """

    Q_hat: np.ndarray
    Omega_hat: np.ndarray
    P_hat: np.ndarray
    V_hat: np.ndarray
    norm_drift: float = 0.0

    def __post_init__(self) -> None:
        if abs(float(np.linalg.norm(self.Q_hat)) - 1.0) > 1e-6:
            raise ValueError("attitude estimate must be a unit quaternion")

    def rotation(self) -> np.ndarray:
        return lg.quat_to_rotation(self.Q_hat)


@dataclass(frozen=True)
class QuatErrors:
    """Attitude errors of estimation and control as unit quaternions."""

    Q_tilde_o: np.ndarray
    Q_tilde_c: np.ndarray


def quat_errors(q_hat: np.ndarray, q_y: np.ndarray,
                q_d: np.ndarray) -> QuatErrors:
    """Estimation error against the reconstructed attitude and control
    error against the desired attitude."""
    return QuatErrors(
        Q_tilde_o=lg.quat_product(lg.quat_inverse(q_hat), q_y),
        Q_tilde_c=lg.quat_product(lg.quat_inverse(q_d), q_hat))


def quat_pa_vex(q: np.ndarray) -> np.ndarray:
    """vex(P_a(.)) of the rotation a unit quaternion encodes, without
    forming the matrix."""
    return -2.0 * q[0] * q[1:4]


def quat_corrections(s: QuatObserverState, q_y: np.ndarray, p_y: np.ndarray,
                     thrust: float, p: VehicleParams,
                     g: ObserverGains) -> CorrectionTerms:
    """Feedback terms from one reconstructed pose, computed through the
    quaternion error composition instead of a matrix product."""
    q_tilde = lg.quat_product(lg.quat_inverse(s.Q_hat), q_y)
    r_tilde = lg.quat_to_rotation(q_tilde)
    axis = quat_pa_vex(q_tilde)
    w_o = -g.gamma_o * (r_tilde.T @ axis)
    w_omega = g.k_o1 * (lg.quat_to_rotation(q_y).T @ axis)
    p_tilde = p_y - s.P_hat
    w_v = -lg.cross3(w_omega, s.P_hat) - g.k_o2 * p_tilde
    r_hat = lg.quat_to_rotation(s.Q_hat)
    w_a = (-(thrust / p.m) * (r_hat.T @ ((np.eye(3) - r_tilde.T) @ E3))
           - p.g * E3 - lg.cross3(w_omega, s.V_hat) - g.k_o3 * p_tilde)
    return CorrectionTerms(w_o=w_o, w_Omega=w_omega, w_V=w_v, w_a=w_a,
                           R_tilde_o=r_tilde, P_tilde_o=p_tilde)


def _kinematics_rate(q: np.ndarray, omega_hat: np.ndarray,
                     w_omega: np.ndarray) -> np.ndarray:
    # Half the difference of the two 4x4 rate blocks applied to q,
    # multiplied out so no unit-norm product routine is involved.
    qv = q[1:4]
    gap = omega_hat - w_omega
    vec = q[0] * gap - lg.cross3(omega_hat + w_omega, qv)
    return 0.5 * np.concatenate(([-float(gap @ qv)], vec))


def quat_attitude_step(q_hat: np.ndarray, omega_hat: np.ndarray,
                       w_omega: np.ndarray, dt: float,
                       mode: str = "exp") -> tuple[np.ndarray, float]:
    """One tick of the attitude kinematics; returns the renormalized
    quaternion and the norm drift of the raw update.

    "exp" composes two exact rotation increments and drifts only by
    rounding. "euler" steps the linear kinematics, whose raw update
    leaves the sphere by O(dt^2 rate^2) before renormalization.
    """
    if mode == "exp":
        raw = lg.quat_product(
            lg.quat_exp(-dt * w_omega),
            lg.quat_product(q_hat, lg.quat_exp(dt * omega_hat)))
    elif mode == "euler":
        raw = q_hat + dt * _kinematics_rate(q_hat, omega_hat, w_omega)
    else:
        raise ValueError(f"unknown attitude update mode: {mode!r}")
    norm = float(np.linalg.norm(raw))
    return raw / norm, abs(norm - 1.0)


def quat_observer_step(s: QuatObserverState, Q_y: np.ndarray,
                       P_y: np.ndarray, thrust: float, p: VehicleParams,
                       gains: ObserverGains, dt: float, *,
                       torque: np.ndarray | None = None,
                       attitude_update: str = "exp") -> QuatObserverState:
    """Advance the full quaternion-attitude estimate by one tick.

    torque=None runs the angular-velocity update with zero applied
    moment (prediction-only replay). The internal order matches the
    matrix loop: corrections from the pre-step state, translation and
    attitude updates, then the angular-velocity update against the
    post-update attitude.
    """
    w = quat_corrections(s, Q_y, P_y, thrust, p, gains)
    mat = ObserverState(R_hat=lg.quat_to_rotation(s.Q_hat),
                        Omega_hat=s.Omega_hat, P_hat=s.P_hat, V_hat=s.V_hat)
    stepped = predict_correct_step(mat, w, thrust, p, dt)
    q_new, drift = quat_attitude_step(s.Q_hat, s.Omega_hat, w.w_Omega, dt,
                                      attitude_update)
    applied = np.zeros(3) if torque is None else torque
    om_new = angular_velocity_step(
        ObserverState(R_hat=lg.quat_to_rotation(q_new),
                      Omega_hat=s.Omega_hat, P_hat=stepped.P_hat,
                      V_hat=stepped.V_hat),
        w, applied, p, dt)
    return QuatObserverState(Q_hat=q_new, Omega_hat=om_new,
                             P_hat=stepped.P_hat, V_hat=stepped.V_hat,
                             norm_drift=drift)


def quat_torque(errors: QuatErrors, Omega_hat: np.ndarray,
                des: DesiredAttitude, p: VehicleParams,
                gains: ControllerGains) -> np.ndarray:
    """Torque command from quaternion-form attitude errors; agrees with
    the matrix-form law through the correction-axis identity."""
    r_tilde_o = lg.quat_to_rotation(errors.Q_tilde_o)
    r_tilde_c = lg.quat_to_rotation(errors.Q_tilde_c)
    om_d_body = r_tilde_c @ des.Omega_d
    return (gains.k_c1 * quat_pa_vex(errors.Q_tilde_c)
            - gains.k_c2 * (r_tilde_o @ Omega_hat - om_d_body)
            + p.J @ (r_tilde_c @ des.Omega_d_dot)
            + lg.cross3(om_d_body, p.J @ om_d_body))
