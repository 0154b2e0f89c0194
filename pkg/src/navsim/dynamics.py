"""Ground-truth rigid-body dynamics of the vehicle and a geometric
integrator: RK4 for the vector states, exponential map for the attitude."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .liegroup import E3, TangentElement, cross3, skew, so3_exp

J_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class VehicleParams:
    """Mass, inertia, and gravity; J must be symmetric positive definite."""

    m: float
    J: np.ndarray
    g: float = 9.81
    J_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m <= 0.0:
            raise ValueError("vehicle mass must be positive")
        if self.g <= 0.0:
            raise ValueError("gravity must be positive")
        j = np.asarray(self.J, dtype=float)
        if j.shape != (3, 3) or np.max(np.abs(j - j.T)) > J_SYMMETRY_TOL:
            raise ValueError("inertia matrix must be 3x3 symmetric")
        if np.any(np.linalg.eigvalsh(j) <= 0.0):
            raise ValueError("inertia matrix must be positive definite")
        object.__setattr__(self, "J", j)
        object.__setattr__(self, "J_inv", np.linalg.inv(j))


@dataclass(frozen=True)
class TrueState:
    """True attitude, body angular velocity, inertial position and velocity."""

    R: np.ndarray
    Omega: np.ndarray
    P: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class ControlCommand:
    """Body torque (N m) and nonnegative thrust magnitude (N)."""

    torque: np.ndarray
    thrust: float

    def __post_init__(self):
        if self.thrust < 0.0:
            raise ValueError("thrust must be nonnegative")


def gravity_tangent(g: float) -> TangentElement:
    """Constant gravity element (0, 0, -g e3, 1) of the tangent space."""
    return TangentElement(np.zeros(3), np.zeros(3), -g * E3, 1.0)


def dynamics_derivative(s: TrueState, u: ControlCommand, p: VehicleParams,
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives (Rdot, Omegadot, Pdot, Vdot) of the true state.

    Rdot = -skew(Omega) R, J Omegadot = skew(J Omega) Omega + torque,
    Pdot = V, Vdot = g e3 - (thrust/m) R^T e3.
    """
    r_dot = -skew(s.Omega) @ s.R
    omega_dot = p.J_inv @ (cross3(p.J @ s.Omega, s.Omega) + u.torque)
    v_dot = p.g * E3 - (u.thrust / p.m) * (s.R.T @ E3)
    return r_dot, omega_dot, s.V.copy(), v_dot


def _omega_rate(omega: np.ndarray, torque: np.ndarray, p: VehicleParams,
                ) -> np.ndarray:
    return p.J_inv @ (cross3(p.J @ omega, omega) + torque)


def _v_rate(r: np.ndarray, thrust_over_m: float, g: float) -> np.ndarray:
    return np.array([-thrust_over_m * r[2, 0],
                     -thrust_over_m * r[2, 1],
                     g - thrust_over_m * r[2, 2]])


def integrate_step(s: TrueState, u: ControlCommand, p: VehicleParams,
                   dt: float) -> TrueState:
    """One RK4 step on (Omega, P, V) with exponential attitude propagation.

    Attitude stages use R_stage = so3_exp(-omega_stage * h) R and the final
    update uses the RK4-weighted average angular velocity, so R stays on
    SO(3) by construction.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    tm = u.thrust / p.m
    g = p.g
    half = 0.5 * dt

    om1 = s.Omega
    dom1 = _omega_rate(om1, u.torque, p)
    dv1 = _v_rate(s.R, tm, g)
    dp1 = s.V

    om2 = om1 + half * dom1
    r2 = so3_exp(-om1 * half) @ s.R
    v2 = s.V + half * dv1
    dom2 = _omega_rate(om2, u.torque, p)
    dv2 = _v_rate(r2, tm, g)
    dp2 = v2

    om3 = om1 + half * dom2
    r3 = so3_exp(-om2 * half) @ s.R
    v3 = s.V + half * dv2
    dom3 = _omega_rate(om3, u.torque, p)
    dv3 = _v_rate(r3, tm, g)
    dp3 = v3

    om4 = om1 + dt * dom3
    r4 = so3_exp(-om3 * dt) @ s.R
    v4 = s.V + dt * dv3
    dom4 = _omega_rate(om4, u.torque, p)
    dv4 = _v_rate(r4, tm, g)
    dp4 = v4

    sixth = dt / 6.0
    omega_new = om1 + sixth * (dom1 + 2.0 * dom2 + 2.0 * dom3 + dom4)
    v_new = s.V + sixth * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
    p_new = s.P + sixth * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
    omega_avg = (om1 + 2.0 * om2 + 2.0 * om3 + om4) / 6.0
    r_new = so3_exp(-omega_avg * dt) @ s.R
    return TrueState(R=r_new, Omega=omega_new, P=p_new, V=v_new)
