"""Full-state pose observer driven by reconstructed attitude/position.

The estimate lives on the navigation matrix (5x5 embedding of attitude,
position, velocity). Each tick computes correction terms from the
reconstructed pose against the previous estimate, then advances the
embedding by a right-multiplied motion exponential and a left-multiplied
correction exponential. The angular-velocity estimate integrates the
rigid-body moment balance expressed through the attitude-error
conjugated inertia, with its own correction feedback.

Conventions: attitude matrices map world to body; the attitude error
R_err = R_meas R_est^T compares measured against estimated attitude and
equals identity at convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import TrueState, VehicleParams
from .liegroup import (E3, TangentElement, attitude_distance, cross3,
                       nav_matrix, nav_unpack, pa_vex, se23_exp, skew)
from .sensing import ReconstructedPose

_ZERO3 = np.zeros(3)

_cross = cross3


@dataclass(frozen=True)
class ObserverGains:
    """Strictly positive feedback gains: attitude-rate pull (gamma_o),
    attitude (k_o1), position (k_o2), and velocity (k_o3)."""

    gamma_o: float = 0.1
    k_o1: float = 10.0
    k_o2: float = 10.0
    k_o3: float = 5.0

    def __post_init__(self) -> None:
        for name in ("gamma_o", "k_o1", "k_o2", "k_o3"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class ObserverState:
    """Current estimate: attitude (world-to-body), angular velocity,
    position, and velocity."""

    R_hat: np.ndarray
    Omega_hat: np.ndarray
    P_hat: np.ndarray
    V_hat: np.ndarray


@dataclass(frozen=True)
class CorrectionTerms:
    """Feedback terms for one tick, kept with the pose errors that
    produced them so downstream steps reuse the same snapshot."""

    w_o: np.ndarray
    w_Omega: np.ndarray
    w_V: np.ndarray
    w_a: np.ndarray
    R_tilde_o: np.ndarray
    P_tilde_o: np.ndarray


@dataclass(frozen=True)
class ObserverErrors:
    """Estimation errors against ground truth."""

    R_tilde_o: np.ndarray
    Omega_tilde_o: np.ndarray
    P_tilde_o: np.ndarray
    V_tilde_o: np.ndarray


def correction_factors(pose_y: ReconstructedPose, s: ObserverState,
                       thrust: float, p: VehicleParams,
                       g: ObserverGains) -> CorrectionTerms:
    """Feedback terms from one reconstructed pose.

    The acceleration term removes gravity and the thrust direction
    mismatch between estimated and measured attitude, so it vanishes up
    to -g e3 at a perfect estimate.
    """
    r_tilde = pose_y.R @ s.R_hat.T
    p_tilde = pose_y.P - s.P_hat
    vexpa = pa_vex(r_tilde)
    w_o = -g.gamma_o * (r_tilde.T @ vexpa)
    w_omega = g.k_o1 * (pose_y.R.T @ vexpa)
    w_v = -_cross(w_omega, s.P_hat) - g.k_o2 * p_tilde
    # R_hat^T (I - R_err^T) e3 collapses to row 3 of R_hat minus row 3
    # of R_meas because R_err R_hat = R_meas.
    thrust_dir_gap = s.R_hat[2, :] - pose_y.R[2, :]
    w_a = (-(thrust / p.m) * thrust_dir_gap - p.g * E3
           - _cross(w_omega, s.V_hat) - g.k_o3 * p_tilde)
    return CorrectionTerms(w_o=w_o, w_Omega=w_omega, w_V=w_v, w_a=w_a,
                           R_tilde_o=r_tilde, P_tilde_o=p_tilde)


def predict_correct_step(s: ObserverState, w: CorrectionTerms, thrust: float,
                         p: VehicleParams, dt: float) -> ObserverState:
    """Advance the navigation-matrix estimate by one tick.

    Right-multiplies the motion exponential (angular velocity, thrust,
    gravity-free), then left-multiplies the inverse correction
    exponential. The angular-velocity field is carried through
    unchanged; its update is a separate step.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    motion = TangentElement(omega=s.Omega_hat, v=_ZERO3,
                            a=-(thrust / p.m) * E3, kappa=1.0)
    correction = TangentElement(omega=w.w_Omega, v=w.w_V, a=w.w_a, kappa=1.0)
    x = nav_matrix(s.R_hat, s.P_hat, s.V_hat)
    x = se23_exp(correction, -dt) @ x @ se23_exp(motion, dt)
    r_hat, p_hat, v_hat = nav_unpack(x)
    return ObserverState(R_hat=r_hat, Omega_hat=s.Omega_hat,
                         P_hat=p_hat, V_hat=v_hat)


def angular_velocity_step(s: ObserverState, w: CorrectionTerms,
                          torque: np.ndarray, p: VehicleParams,
                          dt: float) -> np.ndarray:
    """One Euler step of the angular-velocity estimate.

    The commanded torque and the inertia both enter conjugated by the
    attitude error, so the moment balance is expressed in the estimated
    body frame; the conjugated inverse applies as R_err^T J^{-1} R_err.
    """
    r_tilde = w.R_tilde_o
    om = s.Omega_hat
    j_conj_om = r_tilde.T @ (p.J @ (r_tilde @ om))
    rhs = (_cross(j_conj_om, om) + r_tilde.T @ torque
           - r_tilde.T @ (p.J @ (r_tilde @ _cross(om, s.R_hat @ w.w_Omega)))
           + w.w_o)
    return om + dt * (r_tilde.T @ (p.J_inv @ (r_tilde @ rhs)))


def observer_errors(truth: TrueState, s: ObserverState) -> ObserverErrors:
    """Estimation errors against ground truth, by definition."""
    r_tilde = truth.R @ s.R_hat.T
    return ObserverErrors(R_tilde_o=r_tilde,
                          Omega_tilde_o=truth.Omega - r_tilde @ s.Omega_hat,
                          P_tilde_o=truth.P - s.P_hat,
                          V_tilde_o=truth.V - s.V_hat)


def error_norms(e: ObserverErrors) -> tuple[float, float, float, float]:
    """Scalar summary (attitude distance plus Euclidean norms)."""
    return (attitude_distance(e.R_tilde_o),
            math.sqrt(float(e.Omega_tilde_o @ e.Omega_tilde_o)),
            math.sqrt(float(e.P_tilde_o @ e.P_tilde_o)),
            math.sqrt(float(e.V_tilde_o @ e.V_tilde_o)))


def estimate_rates(s: ObserverState, w: CorrectionTerms, thrust: float,
                   p: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time position and velocity estimate rates.

    These feed the controller's reference chain, which needs the time
    derivatives of the estimate rather than finite differences.
    """
    p_dot = s.V_hat - _cross(w.w_Omega, s.P_hat) - w.w_V
    v_dot = (-(thrust / p.m) * s.R_hat[2, :]
             - _cross(w.w_Omega, s.V_hat) - w.w_a)
    return p_dot, v_dot


def continuous_rates(s: ObserverState, w: CorrectionTerms,
                     torque: np.ndarray, thrust: float, p: VehicleParams
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray,
                                np.ndarray]:
    """Continuous-time rates of all four estimate fields.

    The discrete predict/correct step is a first-order splitting of
    exactly these equations; tests assert the O(dt^2) agreement.
    """
    r_dot = s.R_hat @ skew(w.w_Omega) - skew(s.Omega_hat) @ s.R_hat
    p_dot, v_dot = estimate_rates(s, w, thrust, p)
    r_tilde = w.R_tilde_o
    j_conj_om = r_tilde.T @ (p.J @ (r_tilde @ s.Omega_hat))
    rhs = (_cross(j_conj_om, s.Omega_hat) + r_tilde.T @ torque
           - r_tilde.T @ (p.J @ (r_tilde @ _cross(s.Omega_hat,
                                                  s.R_hat @ w.w_Omega)))
           + w.w_o)
    om_dot = r_tilde.T @ (p.J_inv @ (r_tilde @ rhs))
    return r_dot, om_dot, p_dot, v_dot
