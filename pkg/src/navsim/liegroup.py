"""SO(3) / SE2(3) / unit-quaternion algebra shared by every other module.

Conventions fixed project-wide:

* Attitude kinematics use the passive form Rdot = -skew(Omega) @ R.
* The navigation matrix embeds (R, P, V) as a 5x5 block matrix carrying R^T
  in the upper-left corner (see ``nav_matrix``); tangent elements carry
  (skew(omega), v, a, kappa) with kappa in the (5, 4) slot.
* Quaternions are scalar-first arrays [q0, qx, qy, qz], canonicalized to
  q0 >= 0.  ``quat_to_rotation`` implements
  R = (q0^2 - |q|^2) I + 2 q q^T - 2 q0 skew(q), which pairs with the passive
  kinematics above.  Under ``quat_product`` rotation images compose in
  reversed order, R(a * b) = R(b) @ R(a); the tests pin this down by brute
  force, do not assume the opposite order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Antisymmetry tolerance for vex; rejects misuse while allowing float noise.
VEX_SYM_TOL = 1e-9
# Below this rotation angle the Rodrigues coefficients switch to their Taylor
# forms (removable singularities; series truncation error < 1e-16 here).
SMALL_ANGLE = 1e-2
# Orthonormality drift that triggers re-projection of a rotation matrix.
ROTATION_DRIFT_TOL = 1e-9

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class TangentElement:
    """Element (omega, v, a, kappa) of the 5x5 tangent space used by the
    navigation-matrix exponential; omega enters as skew(omega)."""

    omega: np.ndarray
    v: np.ndarray
    a: np.ndarray
    kappa: float


def skew(y: np.ndarray) -> np.ndarray:
    """Map a 3-vector to the antisymmetric matrix with skew(y) @ z = y x z."""
    return np.array([
        [0.0, -y[2], y[1]],
        [y[2], 0.0, -y[0]],
        [-y[1], y[0], 0.0],
    ])


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors, expanded to skip the generic
    broadcasting machinery (this sits in per-tick hot paths)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def vex(m: np.ndarray) -> np.ndarray:
    """Inverse of skew; rejects input whose symmetric part exceeds tolerance."""
    sym = m + m.T
    if np.max(np.abs(sym)) > VEX_SYM_TOL:
        raise ValueError("vex: matrix is not antisymmetric within tolerance")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def pa_vex(a: np.ndarray) -> np.ndarray:
    """vex of the antisymmetric projection (A - A^T)/2, in one step."""
    return 0.5 * np.array([
        a[2, 1] - a[1, 2],
        a[0, 2] - a[2, 0],
        a[1, 0] - a[0, 1],
    ])


def attitude_distance(r: np.ndarray) -> float:
    """Normalized attitude distance tr(I - R)/4, in [0, 1] on SO(3)."""
    return 0.25 * (3.0 - r[0, 0] - r[1, 1] - r[2, 2])


def psi_matrix(r: np.ndarray) -> np.ndarray:
    """tr(R) I - R; the Jacobian factor of d/dt pa_vex along rotations."""
    return np.trace(r) * np.eye(3) - r


def _rodrigues_coefficients(theta: float) -> tuple[float, float]:
    """(sin t / t, (1 - cos t) / t^2) with a Taylor branch near zero."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))
        b = 0.5 - t2 / 24.0 * (1.0 - t2 / 30.0 * (1.0 - t2 / 56.0))
        return a, b
    return math.sin(theta) / theta, (1.0 - math.cos(theta)) / (theta * theta)


def so3_exp(y: np.ndarray) -> np.ndarray:
    """Rodrigues closed form of exp(skew(y)); exact on SO(3)."""
    theta = math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
    a, b = _rodrigues_coefficients(theta)
    s = skew(y)
    return np.eye(3) + a * s + b * (s @ s)


def _jacobian_coefficients(theta: float) -> tuple[float, float]:
    """Second-order coefficients (t - sin t)/t^3 and (t^2/2 + cos t - 1)/t^4."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        c = (1.0 / 6.0) - t2 / 120.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0))
        d = (1.0 / 24.0) - t2 / 720.0 * (1.0 - t2 / 56.0 * (1.0 - t2 / 90.0))
        return c, d
    t2 = theta * theta
    c = (theta - math.sin(theta)) / (t2 * theta)
    d = (0.5 * t2 + math.cos(theta) - 1.0) / (t2 * t2)
    return c, d


def se23_exp(u: TangentElement, dt: float) -> np.ndarray:
    """Closed-form matrix exponential of the 5x5 embedding of u * dt.

    The top-left block is a Rodrigues rotation; the two translation columns
    carry left-Jacobian integrals of it; the scalar kappa couples the last
    two columns through a nilpotent block.  Matches the truncated power
    series of the embedding to machine precision (see tests).
    """
    w = np.asarray(u.omega, dtype=float) * dt
    v = np.asarray(u.v, dtype=float) * dt
    a = np.asarray(u.a, dtype=float) * dt
    k = u.kappa * dt

    theta = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    ca, cb = _rodrigues_coefficients(theta)
    cc, cd = _jacobian_coefficients(theta)

    s = skew(w)
    s2 = s @ s
    eye = np.eye(3)
    rot = eye + ca * s + cb * s2
    j0 = eye + cb * s + cc * s2
    j1 = 0.5 * eye + cc * s + cd * s2

    out = np.zeros((5, 5))
    out[:3, :3] = rot
    out[:3, 3] = j0 @ v + k * (j1 @ a)
    out[:3, 4] = j0 @ a
    out[3, 3] = 1.0
    out[4, 4] = 1.0
    out[4, 3] = k
    return out


def nav_matrix(r: np.ndarray, p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """5x5 navigation matrix with blocks (R^T, P, V) and unit bottom rows."""
    out = np.zeros((5, 5))
    out[:3, :3] = r.T
    out[:3, 3] = p
    out[:3, 4] = v
    out[3, 3] = 1.0
    out[4, 4] = 1.0
    return out


def nav_unpack(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of nav_matrix: (R, P, V) from a 5x5 navigation matrix."""
    return x[:3, :3].T.copy(), x[:3, 3].copy(), x[:3, 4].copy()


def quat_product(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Quaternion product, scalar-first; renormalizes if drift exceeds 1e-12."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    out = np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + w2 * x1 + y1 * z2 - z1 * y2,
        w1 * y2 + w2 * y1 + z1 * x2 - x1 * z2,
        w1 * z2 + w2 * z1 + x1 * y2 - y1 * x2,
    ])
    n2 = out @ out
    if abs(n2 - 1.0) > 2e-12:
        out /= math.sqrt(n2)
    return out


def quat_inverse(q: np.ndarray) -> np.ndarray:
    """Inverse of a unit quaternion (conjugate)."""
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Unit-norm quaternion canonicalized to q0 >= 0."""
    out = q / math.sqrt(q @ q)
    return -out if out[0] < 0.0 else out


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation image (q0^2 - |q|^2) I + 2 q q^T - 2 q0 skew(q)."""
    q0 = q[0]
    qv = q[1:]
    return ((q0 * q0 - qv @ qv) * np.eye(3)
            + 2.0 * np.outer(qv, qv)
            - 2.0 * q0 * skew(qv))


def rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """Inverse of quat_to_rotation, canonicalized to q0 >= 0.

    Shepperd-style branch on the largest diagonal entry keeps the division
    well conditioned for rotations near pi.
    """
    # quat_to_rotation transposed has the textbook scalar-first layout, so
    # the standard extraction runs on m = r.T.
    m = r.T
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr >= m[0, 0] and tr >= m[1, 1] and tr >= m[2, 2]:
        s = math.sqrt(1.0 + tr) * 2.0
        q = np.array([
            0.25 * s,
            (m[2, 1] - m[1, 2]) / s,
            (m[0, 2] - m[2, 0]) / s,
            (m[1, 0] - m[0, 1]) / s,
        ])
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([
            (m[2, 1] - m[1, 2]) / s,
            0.25 * s,
            (m[0, 1] + m[1, 0]) / s,
            (m[0, 2] + m[2, 0]) / s,
        ])
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([
            (m[0, 2] - m[2, 0]) / s,
            (m[0, 1] + m[1, 0]) / s,
            0.25 * s,
            (m[1, 2] + m[2, 1]) / s,
        ])
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([
            (m[1, 0] - m[0, 1]) / s,
            (m[0, 2] + m[2, 0]) / s,
            (m[1, 2] + m[2, 1]) / s,
            0.25 * s,
        ])
    return quat_normalize(q)


def quat_exp(y: np.ndarray) -> np.ndarray:
    """Half-angle quaternion [cos(|y|/2), sin(|y|/2) y/|y|].

    Its rotation image under this project's conventions is so3_exp(-y);
    the quaternion observer relies on that pairing (verified in tests).
    """
    theta = math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
    half = 0.5 * theta
    if theta < SMALL_ANGLE:
        t2 = half * half
        sc = 0.5 * (1.0 - t2 / 6.0 * (1.0 - t2 / 20.0))
    else:
        sc = math.sin(half) / theta
    return np.array([math.cos(half), sc * y[0], sc * y[1], sc * y[2]])


def rotation_defect(r: np.ndarray) -> float:
    """Frobenius distance of R R^T from the identity."""
    return float(np.linalg.norm(r @ r.T - np.eye(3)))


def project_rotation(r: np.ndarray) -> np.ndarray:
    """Nearest proper rotation in the Frobenius sense (polar projection)."""
    u, _, vt = np.linalg.svd(r)
    d = np.linalg.det(u @ vt)
    return u @ np.diag([1.0, 1.0, d]) @ vt


def repair_rotation(r: np.ndarray) -> tuple[np.ndarray, bool]:
    """Re-project R onto SO(3) when drift exceeds ROTATION_DRIFT_TOL.

    Returns the (possibly repaired) matrix and whether a repair fired, so
    long-running loops can count repairs instead of hiding them.
    """
    if rotation_defect(r) > ROTATION_DRIFT_TOL:
        return project_rotation(r), True
    return r, False
