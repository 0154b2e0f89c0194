"""Vehicle-dynamics tests: compact-form equivalence, conservation laws,
hover exactness, and attitude orthogonality under integration."""

from __future__ import annotations

import numpy as np
import pytest

from navsim import liegroup as lg
from navsim.dynamics import (ControlCommand, TrueState, VehicleParams,
                             dynamics_derivative, gravity_tangent,
                             integrate_step)
from util import random_rotation, tangent_embedding

PARAMS = VehicleParams(m=2.5, J=np.diag([0.14, 0.2, 0.12]))


def random_state(rng: np.random.Generator) -> TrueState:
    return TrueState(R=random_rotation(rng), Omega=rng.normal(size=3),
                     P=rng.normal(size=3), V=rng.normal(size=3))


def test_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(m=-1.0, J=np.eye(3))
    with pytest.raises(ValueError):
        VehicleParams(m=1.0, J=np.diag([1.0, 1.0, -1.0]))
    asym = np.eye(3)
    asym[0, 1] = 1e-6
    with pytest.raises(ValueError):
        VehicleParams(m=1.0, J=asym)
    with pytest.raises(ValueError):
        VehicleParams(m=1.0, J=np.eye(3), g=0.0)
    with pytest.raises(ValueError):
        ControlCommand(torque=np.zeros(3), thrust=-0.1)


def test_zero_torque_zero_omega_has_no_angular_acceleration():
    s = TrueState(R=np.eye(3), Omega=np.zeros(3), P=np.zeros(3), V=np.zeros(3))
    _, omega_dot, _, _ = dynamics_derivative(
        s, ControlCommand(np.zeros(3), 0.0), PARAMS)
    np.testing.assert_array_equal(omega_dot, np.zeros(3))


def test_hover_has_zero_linear_acceleration():
    s = TrueState(R=np.eye(3), Omega=np.zeros(3), P=np.zeros(3), V=np.zeros(3))
    u = ControlCommand(np.zeros(3), PARAMS.m * PARAMS.g)
    _, _, _, v_dot = dynamics_derivative(s, u, PARAMS)
    np.testing.assert_allclose(v_dot, np.zeros(3), atol=1e-15)


def test_compact_form_equivalence():
    # Assembled Xdot must equal X U - G X with U = (skew(Omega), 0, -t/m e3, 1).
    rng = np.random.default_rng(30)
    gmat = tangent_embedding(np.zeros(3), np.zeros(3), -PARAMS.g * lg.E3, 1.0)
    gt = gravity_tangent(PARAMS.g)
    np.testing.assert_array_equal(
        gmat, tangent_embedding(gt.omega, gt.v, gt.a, gt.kappa))
    for _ in range(100):
        s = random_state(rng)
        u = ControlCommand(rng.normal(size=3), abs(rng.normal()) * 10.0)
        r_dot, _, p_dot, v_dot = dynamics_derivative(s, u, PARAMS)
        x = lg.nav_matrix(s.R, s.P, s.V)
        umat = tangent_embedding(s.Omega, np.zeros(3),
                                 -(u.thrust / PARAMS.m) * lg.E3, 1.0)
        x_dot = x @ umat - gmat @ x
        np.testing.assert_allclose(x_dot[:3, :3], r_dot.T, atol=1e-12)
        np.testing.assert_allclose(x_dot[:3, 3], p_dot, atol=1e-12)
        np.testing.assert_allclose(x_dot[:3, 4], v_dot, atol=1e-12)
        np.testing.assert_allclose(x_dot[3:], np.zeros((2, 5)), atol=1e-15)


def test_zero_state_zero_input_is_fixed_point_of_integration():
    s = TrueState(R=np.eye(3), Omega=np.zeros(3), P=np.zeros(3), V=np.zeros(3))
    u = ControlCommand(np.zeros(3), PARAMS.m * PARAMS.g)
    out = integrate_step(s, u, PARAMS, 1e-3)
    np.testing.assert_allclose(out.R, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(out.Omega, np.zeros(3), atol=1e-15)
    np.testing.assert_allclose(out.P, np.zeros(3), atol=1e-15)
    np.testing.assert_allclose(out.V, np.zeros(3), atol=1e-15)


def test_torque_free_conservation_over_ten_seconds():
    # Euler-equation first integrals: kinetic energy and |J Omega|.
    s = TrueState(R=np.eye(3), Omega=np.array([1.0, 2.0, 3.0]),
                  P=np.zeros(3), V=np.zeros(3))
    u = ControlCommand(np.zeros(3), 0.0)
    e0 = 0.5 * s.Omega @ PARAMS.J @ s.Omega
    h0 = np.linalg.norm(PARAMS.J @ s.Omega)
    for _ in range(10_000):
        s = integrate_step(s, u, PARAMS, 1e-3)
    e1 = 0.5 * s.Omega @ PARAMS.J @ s.Omega
    h1 = np.linalg.norm(PARAMS.J @ s.Omega)
    assert abs(e1 - e0) / e0 <= 1e-8
    assert abs(h1 - h0) / h0 <= 1e-8
    assert lg.rotation_defect(s.R) <= 1e-10


def test_orthogonality_drift_per_step():
    rng = np.random.default_rng(31)
    s = random_state(rng)
    u = ControlCommand(rng.normal(size=3), 5.0)
    for _ in range(100):
        before = lg.rotation_defect(s.R)
        s = integrate_step(s, u, PARAMS, 1e-3)
        after = lg.rotation_defect(s.R)
        assert after - before <= 1e-12


def test_constant_hover_position_stays_put():
    s = TrueState(R=np.eye(3), Omega=np.zeros(3),
                  P=np.array([1.0, -2.0, 3.0]), V=np.zeros(3))
    u = ControlCommand(np.zeros(3), PARAMS.m * PARAMS.g)
    for _ in range(1000):
        s = integrate_step(s, u, PARAMS, 1e-3)
    np.testing.assert_allclose(s.P, np.array([1.0, -2.0, 3.0]), atol=1e-9)
    np.testing.assert_allclose(s.V, np.zeros(3), atol=1e-9)


def test_integration_error_shrinks_quadratically():
    # The exponential-stage scheme keeps R on SO(3) exactly; the price is
    # second-order (not fourth) convergence for the R-coupled velocity.
    rng = np.random.default_rng(32)
    s0 = random_state(rng)
    u = ControlCommand(np.array([0.1, -0.2, 0.05]), 20.0)

    def advance(dt, n):
        s = s0
        for _ in range(n):
            s = integrate_step(s, u, PARAMS, dt)
        return s

    ref = advance(1e-5, 40_000)
    errs = []
    for dt, n in ((4e-3, 100), (2e-3, 200), (1e-3, 400)):
        s = advance(dt, n)
        errs.append(np.linalg.norm(s.Omega - ref.Omega)
                    + np.linalg.norm(s.V - ref.V)
                    + np.linalg.norm(s.R - ref.R))
    assert errs[0] / errs[1] > 3.0
    assert errs[1] / errs[2] > 3.0
