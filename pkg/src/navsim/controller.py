"""Position-tracking controller built on the observer's estimate.

A saturated auxiliary state turns the position/velocity estimate errors
into a bounded intermediary acceleration command F; the thrust magnitude
is m ||g e3 - F||. The attitude that points the thrust axis along
g e3 - F is singularity-free everywhere except the straight-up locus
F = [0, 0, a] with a >= g, and its angular velocity and acceleration
follow from an explicit 3x3 map applied to the derivatives of F. The
torque law tracks that desired attitude with gyroscopic feed-forward.

All saturations are hyperbolic tangents, so every commanded quantity is
bounded by gains plus trajectory bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import VehicleParams
from .liegroup import pa_vex, quat_to_rotation
from .observer import ObserverState

NEAR_SINGULAR_Q_TOL = 1e-8
SINGULAR_ALPHA_TOL = 1e-12
TRAJECTORY_CHECK_TIMES = (0.0, 0.7, 1.3, 2.9, 10.0)
TRAJECTORY_CHECK_TOL = 1e-4


class SingularThrustDirectionError(ValueError):
    """Raised on the straight-up thrust locus where the desired attitude
    is undefined."""


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


@dataclass(frozen=True)
class ControllerGains:
    """Strictly positive gains: attitude (k_c1, k_c2), position loop
    (k_c3, k_c4), and auxiliary-state saturation (k_theta1, k_theta2)."""

    k_c1: float = 10.0
    k_c2: float = 0.1
    k_c3: float = 2.0
    k_c4: float = 4.0
    k_theta1: float = 1.0
    k_theta2: float = 1.0

    def __post_init__(self) -> None:
        for name in ("k_c1", "k_c2", "k_c3", "k_c4", "k_theta1", "k_theta2"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class AuxiliaryState:
    """Saturation filter state; theta_ddot holds the acceleration that
    produced the current (theta, theta_dot)."""

    theta: np.ndarray
    theta_dot: np.ndarray
    theta_ddot: np.ndarray

    @staticmethod
    def zero() -> "AuxiliaryState":
        return AuxiliaryState(theta=np.zeros(3), theta_dot=np.zeros(3),
                              theta_ddot=np.zeros(3))


@dataclass(frozen=True)
class TrajectorySample:
    """Reference position and its first four time derivatives at one
    instant."""

    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    jerk: np.ndarray
    snap: np.ndarray


@dataclass(frozen=True)
class DesiredTrajectory:
    """A smooth reference t -> TrajectorySample.

    Construction cross-checks each stored derivative against a central
    finite difference of the level above it, so a factory with an
    inconsistent derivative chain fails immediately.
    """

    sample: Callable[[float], TrajectorySample]
    check_times: tuple = field(default=TRAJECTORY_CHECK_TIMES)

    def __post_init__(self) -> None:
        h = 1e-4
        for t in self.check_times:
            lo, mid, hi = (self.sample(t - h), self.sample(t),
                           self.sample(t + h))
            for name, deriv in (("vel", "pos"), ("acc", "vel"),
                                ("jerk", "acc"), ("snap", "jerk")):
                fd = (getattr(hi, deriv) - getattr(lo, deriv)) / (2.0 * h)
                stated = getattr(mid, name)
                scale = max(1.0, float(np.max(np.abs(stated))))
                if np.max(np.abs(fd - stated)) > TRAJECTORY_CHECK_TOL * scale:
                    raise ValueError(
                        f"trajectory {name} disagrees with the finite "
                        f"difference of {deriv} at t={t}")


def figure_eight_climb() -> DesiredTrajectory:
    """Planar figure-eight with a steady climb."""

    def evaluate(t: float) -> TrajectorySample:
        s1, c1 = math.sin(0.2 * t), math.cos(0.2 * t)
        s2, c2 = math.sin(0.4 * t), math.cos(0.4 * t)
        return TrajectorySample(
            pos=np.array([6.0 * s1, 3.0 * s2, 4.0 + 0.15 * t]),
            vel=np.array([1.2 * c1, 1.2 * c2, 0.15]),
            acc=np.array([-0.24 * s1, -0.48 * s2, 0.0]),
            jerk=np.array([-0.048 * c1, -0.192 * c2, 0.0]),
            snap=np.array([0.0096 * s1, 0.0768 * s2, 0.0]))

    return DesiredTrajectory(sample=evaluate)


def hover_point(point: np.ndarray) -> DesiredTrajectory:
    """Constant reference position."""
    target = np.asarray(point, dtype=float)
    zero = np.zeros(3)

    def evaluate(t: float) -> TrajectorySample:
        return TrajectorySample(pos=target.copy(), vel=zero.copy(),
                                acc=zero.copy(), jerk=zero.copy(),
                                snap=zero.copy())

    return DesiredTrajectory(sample=evaluate)


@dataclass(frozen=True)
class IntermediaryControl:
    """Bounded acceleration command with its derivatives and the thrust
    geometry scalars alpha1 = ||g e3 - F|| and alpha2 = alpha1 + g - f3."""

    F: np.ndarray
    F_dot: np.ndarray
    F_ddot: np.ndarray
    alpha1: float
    alpha2: float
    thrust: float


@dataclass(frozen=True)
class DesiredAttitude:
    """Thrust-aligned attitude target with its rotation rates."""

    Q_d: np.ndarray
    R_d: np.ndarray
    Omega_d: np.ndarray
    Omega_d_dot: np.ndarray


@dataclass(frozen=True)
class ControlErrors:
    """Tracking errors of a state (true or estimated) against the
    desired attitude and trajectory."""

    R_tilde_c: np.ndarray
    Omega_tilde_c: np.ndarray
    P_tilde_c: np.ndarray
    V_tilde_c: np.ndarray


def saturation_psi(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise tanh and the chain-rule factor (1 - tanh^2)."""
    psi = np.tanh(x)
    return psi, 1.0 - psi * psi


def aux_theta_step(a: AuxiliaryState, est: ObserverState,
                   sample: TrajectorySample, g: ControllerGains,
                   dt: float) -> AuxiliaryState:
    """Advance the saturation filter one tick.

    Acceleration from the current state, then velocity, then position
    (semi-implicit Euler), so the returned theta_ddot is the one that
    produced the returned (theta, theta_dot).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    psi_t, _ = saturation_psi(a.theta)
    psi_td, _ = saturation_psi(a.theta_dot)
    ddot = (-g.k_theta1 * psi_t - g.k_theta2 * psi_td
            + g.k_c3 * (est.P_hat - sample.pos - a.theta)
            + g.k_c4 * (est.V_hat - sample.vel - a.theta_dot))
    dot = a.theta_dot + dt * ddot
    return AuxiliaryState(theta=a.theta + dt * dot, theta_dot=dot,
                          theta_ddot=ddot)


def _f_value(a: AuxiliaryState, sample: TrajectorySample,
             g: ControllerGains) -> np.ndarray:
    psi_t, _ = saturation_psi(a.theta)
    psi_td, _ = saturation_psi(a.theta_dot)
    return sample.acc - g.k_theta1 * psi_t - g.k_theta2 * psi_td


def thrust_command(a: AuxiliaryState, sample: TrajectorySample,
                   g: ControllerGains, p: VehicleParams
                   ) -> tuple[np.ndarray, float]:
    """The acceleration command F and thrust m ||g e3 - F||.

    Lighter than intermediary_F: no derivatives, so it needs no estimate
    rates and is safe to evaluate before the observer step.
    """
    f = _f_value(a, sample, g)
    lift = np.array([-f[0], -f[1], p.g - f[2]])
    return f, p.m * math.sqrt(float(lift @ lift))


def intermediary_F(a: AuxiliaryState, sample: TrajectorySample,
                   est_rates: tuple[np.ndarray, np.ndarray],
                   g: ControllerGains, p: VehicleParams
                   ) -> IntermediaryControl:
    """The acceleration command with its first two time derivatives.

    The derivative chain runs through the saturation chain rules and the
    filter's third derivative, which consumes the observer's continuous
    position/velocity rates (est_rates) rather than finite differences.

    Raises SingularThrustDirectionError on the straight-up locus where
    alpha2 vanishes.
    """
    p_hat_dot, v_hat_dot = est_rates
    psi_t, fac_t = saturation_psi(a.theta)
    psi_td, fac_td = saturation_psi(a.theta_dot)
    f = sample.acc - g.k_theta1 * psi_t - g.k_theta2 * psi_td

    dpsi_t = fac_t * a.theta_dot
    dpsi_td = fac_td * a.theta_ddot
    theta_dddot = (-g.k_theta1 * dpsi_t - g.k_theta2 * dpsi_td
                   + g.k_c3 * (p_hat_dot - sample.vel - a.theta_dot)
                   + g.k_c4 * (v_hat_dot - sample.acc - a.theta_ddot))
    f_dot = sample.jerk - g.k_theta1 * dpsi_t - g.k_theta2 * dpsi_td
    ddpsi_t = fac_t * (a.theta_ddot - 2.0 * psi_t * a.theta_dot ** 2)
    ddpsi_td = fac_td * (theta_dddot - 2.0 * psi_td * a.theta_ddot ** 2)
    f_ddot = sample.snap - g.k_theta1 * ddpsi_t - g.k_theta2 * ddpsi_td

    lift = np.array([-f[0], -f[1], p.g - f[2]])
    alpha1 = math.sqrt(float(lift @ lift))
    alpha2 = alpha1 + p.g - f[2]
    if alpha2 <= SINGULAR_ALPHA_TOL * max(p.g, alpha1):
        raise SingularThrustDirectionError(
            "thrust direction is straight up; desired attitude undefined")
    return IntermediaryControl(F=f, F_dot=f_dot, F_ddot=f_ddot,
                               alpha1=alpha1, alpha2=alpha2,
                               thrust=p.m * alpha1)


def desired_attitude(ic: IntermediaryControl, p: VehicleParams
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Quaternion and rotation aligning the thrust axis with g e3 - F.

    The defining property is (thrust/m) R_d^T e3 = g e3 - F; tests hold
    it to 1e-10.
    """
    if ic.alpha1 <= 0.0:
        raise SingularThrustDirectionError("zero thrust direction")
    half_ratio = ic.alpha2 / (2.0 * ic.alpha1)
    if half_ratio <= NEAR_SINGULAR_Q_TOL ** 2:
        raise SingularThrustDirectionError(
            "desired attitude too close to the straight-up locus")
    q0 = math.sqrt(half_ratio)
    scale = 1.0 / (2.0 * ic.alpha1 * q0)
    q_d = np.array([q0, scale * ic.F[1], -scale * ic.F[0], 0.0])
    return q_d, quat_to_rotation(q_d)


def xi_matrix(ic: IntermediaryControl, p: VehicleParams
              ) -> tuple[np.ndarray, np.ndarray]:
    """The map from F-derivatives to desired angular rates, with its
    time derivative (entrywise product/quotient rules)."""
    a1, a2 = ic.alpha1, ic.alpha2
    if a1 <= SINGULAR_ALPHA_TOL * p.g or a2 <= SINGULAR_ALPHA_TOL * p.g:
        raise SingularThrustDirectionError(
            "thrust geometry scalars vanish; angular-rate map undefined")
    f1, f2, f3 = float(ic.F[0]), float(ic.F[1]), float(ic.F[2])
    df1, df2, df3 = (float(ic.F_dot[0]), float(ic.F_dot[1]),
                     float(ic.F_dot[2]))
    a1_dot = (f1 * df1 + f2 * df2 + (f3 - p.g) * df3) / a1
    a2_dot = a1_dot - df3

    n = np.array([[-f1 * f2, -f2 * f2 + a1 * a2, f2 * a2],
                  [f1 * f1 - a1 * a2, f1 * f2, -f1 * a2],
                  [f2 * a1, -f1 * a1, 0.0]])
    n_dot = np.array([
        [-df1 * f2 - f1 * df2,
         -2.0 * f2 * df2 + a1_dot * a2 + a1 * a2_dot,
         df2 * a2 + f2 * a2_dot],
        [2.0 * f1 * df1 - a1_dot * a2 - a1 * a2_dot,
         df1 * f2 + f1 * df2,
         -df1 * a2 - f1 * a2_dot],
        [df2 * a1 + f2 * a1_dot, -df1 * a1 - f1 * a1_dot, 0.0],
    ])
    d = a1 * a1 * a2
    d_dot = 2.0 * a1 * a1_dot * a2 + a1 * a1 * a2_dot
    xi = n / d
    xi_dot = n_dot / d - n * (d_dot / (d * d))
    return xi, xi_dot


def desired_angular_velocity(ic: IntermediaryControl, p: VehicleParams
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Desired angular velocity and acceleration from the F chain."""
    xi, xi_dot = xi_matrix(ic, p)
    omega_d = xi @ ic.F_dot
    omega_d_dot = xi_dot @ ic.F_dot + xi @ ic.F_ddot
    return omega_d, omega_d_dot


def control_errors(r: np.ndarray, omega: np.ndarray, pos: np.ndarray,
                   vel: np.ndarray, des: DesiredAttitude,
                   sample: TrajectorySample) -> ControlErrors:
    """Tracking errors of the given state against the desired motion."""
    r_tilde = r @ des.R_d.T
    return ControlErrors(R_tilde_c=r_tilde,
                         Omega_tilde_c=omega - r_tilde @ des.Omega_d,
                         P_tilde_c=pos - sample.pos,
                         V_tilde_c=vel - sample.vel)


def torque(errs: ControlErrors, r_tilde_o: np.ndarray, omega_hat: np.ndarray,
           des: DesiredAttitude, p: VehicleParams,
           g: ControllerGains) -> np.ndarray:
    """Attitude-tracking torque with gyroscopic feed-forward.

    The rate feedback compares the observer's angular velocity carried
    into the measured frame against the desired rate carried through the
    attitude error.
    """
    r_tilde_c = errs.R_tilde_c
    rot_omega_d = r_tilde_c @ des.Omega_d
    j_rot = p.J @ rot_omega_d
    return (g.k_c1 * pa_vex(r_tilde_c)
            - g.k_c2 * (r_tilde_o @ omega_hat - rot_omega_d)
            + p.J @ (r_tilde_c @ des.Omega_d_dot)
            + _cross(rot_omega_d, j_rot))
