"""Shared helpers for the test suite: random group elements and independent
series/finite-difference oracles that the library code never imports."""

from __future__ import annotations

import numpy as np


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation from a random axis and angle in (0, pi)."""
    axis = random_unit_vector(rng)
    angle = rng.uniform(0.0, np.pi)
    return rodrigues(axis * angle)


def rodrigues(y: np.ndarray) -> np.ndarray:
    """Independent Rodrigues evaluation used only as a test oracle."""
    theta = np.linalg.norm(y)
    if theta < 1e-12:
        return np.eye(3)
    k = y / theta
    kx = np.array([
        [0.0, -k[2], k[1]],
        [k[2], 0.0, -k[0]],
        [-k[1], k[0], 0.0],
    ])
    return np.eye(3) + np.sin(theta) * kx + (1.0 - np.cos(theta)) * (kx @ kx)


def random_quat(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return q


def taylor_expm(m: np.ndarray, terms: int = 30) -> np.ndarray:
    """Truncated power series of the matrix exponential (Horner form)."""
    n = m.shape[0]
    out = np.eye(n) + m / terms
    for k in range(terms - 1, 0, -1):
        out = np.eye(n) + (m / k) @ out
    return out


def tangent_embedding(omega: np.ndarray, v: np.ndarray, a: np.ndarray,
                      kappa: float) -> np.ndarray:
    """5x5 embedding of a tangent element, assembled independently."""
    out = np.zeros((5, 5))
    out[0, 1] = -omega[2]
    out[0, 2] = omega[1]
    out[1, 0] = omega[2]
    out[1, 2] = -omega[0]
    out[2, 0] = -omega[1]
    out[2, 1] = omega[0]
    out[:3, 3] = v
    out[:3, 4] = a
    out[4, 3] = kappa
    return out
