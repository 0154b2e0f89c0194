"""Measurement synthesis and pose reconstruction.

Vector observations are known inertial directions seen in the body frame,
y = R v + b + n; landmark observations are body-frame offsets to known
world points, z = R (p - P) + b + n, with R the world-to-body map.

Attitude is recovered by solving the weighted orthogonal-Procrustes
problem over unit direction pairs (SVD with a determinant correction so
the result is always a proper rotation); position follows from the
weighted landmark centroid. A frame is classified as observable when the
available references pin down all six pose degrees of freedom:
  mode "vectors":   at least two non-collinear vector references plus
                    one landmark,
  mode "mixed":     at least one vector and two distinct landmarks whose
                    combined directions are non-collinear,
  mode "landmarks": at least three non-collinear landmarks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .liegroup import E3, cross3

COLLINEARITY_TOL = 1e-6
DEGENERATE_RANK_TOL = 1e-6
DISTINCT_POSITION_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Raised when a measurement set cannot pin down the pose."""


@dataclass(frozen=True)
class InertialReference:
    """A known inertial direction observed in the body frame."""

    direction: np.ndarray
    bias: np.ndarray
    noise_std: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction",
                           np.asarray(self.direction, dtype=float))
        object.__setattr__(self, "bias", np.asarray(self.bias, dtype=float))
        if np.linalg.norm(self.direction) == 0.0:
            raise ValueError("reference direction must be nonzero")
        if self.weight <= 0.0:
            raise ValueError("weight must be positive")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be nonnegative")


@dataclass(frozen=True)
class LandmarkReference:
    """A known world point observed as a body-frame offset."""

    position: np.ndarray
    bias: np.ndarray
    noise_std: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float))
        object.__setattr__(self, "bias", np.asarray(self.bias, dtype=float))
        if not np.all(np.isfinite(self.position)):
            raise ValueError("landmark position must be finite")
        if self.weight <= 0.0:
            raise ValueError("weight must be positive")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be nonnegative")


@dataclass(frozen=True)
class MeasurementFrame:
    """Body-frame measurements taken at one instant.

    Rows of ``vectors`` and ``landmarks`` line up with the reference
    lists that produced them.
    """

    t: float
    vectors: np.ndarray
    landmarks: np.ndarray


@dataclass(frozen=True)
class ReconstructedPose:
    """Attitude and position recovered from one measurement frame."""

    R: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class SensorSuite:
    """The full reference configuration, with stacked arrays cached for
    per-tick synthesis and reconstruction."""

    vector_refs: tuple[InertialReference, ...]
    landmark_refs: tuple[LandmarkReference, ...]

    def __post_init__(self) -> None:
        vr = tuple(self.vector_refs)
        lr = tuple(self.landmark_refs)
        object.__setattr__(self, "vector_refs", vr)
        object.__setattr__(self, "landmark_refs", lr)
        if vr:
            dirs = np.array([r.direction for r in vr])
            vb = np.array([r.bias for r in vr])
            vs = np.array([r.noise_std for r in vr])
            vw = np.array([r.weight for r in vr])
        else:
            dirs = np.zeros((0, 3))
            vb = np.zeros((0, 3))
            vs = np.zeros(0)
            vw = np.zeros(0)
        if lr:
            pos = np.array([r.position for r in lr])
            lb = np.array([r.bias for r in lr])
            ls = np.array([r.noise_std for r in lr])
            lw = np.array([r.weight for r in lr])
        else:
            pos = np.zeros((0, 3))
            lb = np.zeros((0, 3))
            ls = np.zeros(0)
            lw = np.zeros(0)
        object.__setattr__(self, "vector_dirs", dirs)
        object.__setattr__(self, "vector_bias", vb)
        object.__setattr__(self, "vector_noise", vs[:, None])
        object.__setattr__(self, "vector_weights", vw)
        object.__setattr__(self, "vector_noisy", bool(np.any(vs > 0.0)))
        object.__setattr__(self, "landmark_pos", pos)
        object.__setattr__(self, "landmark_bias", lb)
        object.__setattr__(self, "landmark_noise", ls[:, None])
        object.__setattr__(self, "landmark_weights", lw)
        object.__setattr__(self, "landmark_noisy", bool(np.any(ls > 0.0)))
        # Static per-tick quantities: the cross of the first two vector
        # references and the weighted landmark centroid.
        cross_ref = cross3(dirs[0], dirs[1]) if len(vr) >= 2 else None
        object.__setattr__(self, "vector_cross_ref", cross_ref)
        w_sum = float(np.sum(lw))
        centroid = lw @ pos / w_sum if lr and w_sum > 0.0 else None
        object.__setattr__(self, "landmark_weight_sum", w_sum)
        object.__setattr__(self, "landmark_centroid", centroid)


def synth_vector_meas(r: np.ndarray, ref: InertialReference,
                      rng: np.random.Generator) -> np.ndarray:
    """One body-frame observation of a known inertial direction."""
    y = r @ ref.direction + ref.bias
    if ref.noise_std > 0.0:
        y = y + ref.noise_std * rng.standard_normal(3)
    return y


def synth_landmark_meas(r: np.ndarray, p: np.ndarray, ref: LandmarkReference,
                        rng: np.random.Generator) -> np.ndarray:
    """One body-frame offset measurement of a known world point."""
    z = r @ (ref.position - p) + ref.bias
    if ref.noise_std > 0.0:
        z = z + ref.noise_std * rng.standard_normal(3)
    return z


def synth_frame(suite: SensorSuite, r: np.ndarray, p: np.ndarray,
                rng: np.random.Generator, t: float) -> MeasurementFrame:
    """All measurements for one instant, vectors first then landmarks.

    Noise is drawn in that fixed order so a given seed reproduces the
    same frame sequence.
    """
    y = suite.vector_dirs @ r.T + suite.vector_bias
    if suite.vector_noisy:
        y = y + suite.vector_noise * rng.standard_normal(y.shape)
    z = (suite.landmark_pos - p) @ r.T + suite.landmark_bias
    if suite.landmark_noisy:
        z = z + suite.landmark_noise * rng.standard_normal(z.shape)
    return MeasurementFrame(t=t, vectors=y, landmarks=z)


def svd_attitude(pairs: list[tuple[np.ndarray, np.ndarray, float]]
                 ) -> np.ndarray:
    """Best-fit rotation taking inertial directions to body directions.

    Each pair is (inertial direction, body measurement, weight); both
    directions are normalized before entering the fit. The determinant
    correction keeps the output a proper rotation even when noise makes
    the raw SVD factor a reflection.

    Raises DegenerateGeometryError when the pair set spans fewer than
    two directions.
    """
    b = np.zeros((3, 3))
    for r_dir, y_dir, w in pairs:
        rn = math.sqrt(float(r_dir @ r_dir))
        yn = math.sqrt(float(y_dir @ y_dir))
        if rn == 0.0 or yn == 0.0:
            raise DegenerateGeometryError("zero-length direction in pair")
        b += (w / (rn * yn)) * np.outer(y_dir, r_dir)
    u, s, vt = np.linalg.svd(b)
    if s[1] <= DEGENERATE_RANK_TOL * max(s[0], 1.0):
        raise DegenerateGeometryError(
            "direction pairs are collinear; attitude is unobservable")
    u_plus = u.copy()
    u_plus[:, 2] *= np.linalg.det(u)
    v_plus_t = vt.copy()
    v_plus_t[2, :] *= np.linalg.det(vt)
    return u_plus @ v_plus_t


def reconstruct_position(refs: list[LandmarkReference], z: np.ndarray,
                         weights: np.ndarray, r_y: np.ndarray) -> np.ndarray:
    """Position from weighted landmark centroids, given the attitude."""
    if len(refs) == 0:
        raise ValueError("position reconstruction needs at least one landmark")
    w = np.asarray(weights, dtype=float)
    sc = float(np.sum(w))
    if sc <= 0.0:
        raise ValueError("landmark weights must sum to a positive value")
    p_stack = np.array([ref.position for ref in refs])
    z_stack = np.asarray(z, dtype=float).reshape(len(refs), 3)
    p_c = w @ p_stack / sc
    z_c = w @ z_stack / sc
    return p_c - r_y.T @ z_c


def attitude_pairs(suite: SensorSuite,
                   frame: MeasurementFrame
                   ) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """Direction pairs feeding the attitude fit for one frame.

    With two or more vector references the pairs are the vectors plus
    the cross product of the first two (weight 1), and landmarks stay
    out of the attitude fit. With fewer, centered landmark offsets fill
    in: both the world points and the measurements are referred to their
    weighted centroids, which removes the unknown position.
    """
    pairs: list[tuple[np.ndarray, np.ndarray, float]] = []
    n_vec = len(suite.vector_refs)
    for i in range(n_vec):
        pairs.append((suite.vector_dirs[i], frame.vectors[i],
                      float(suite.vector_weights[i])))
    if n_vec >= 2:
        r3 = suite.vector_cross_ref
        y3 = cross3(frame.vectors[0], frame.vectors[1])
        if (math.sqrt(float(r3 @ r3)) > DISTINCT_POSITION_TOL
                and math.sqrt(float(y3 @ y3)) > DISTINCT_POSITION_TOL):
            pairs.append((r3, y3, 1.0))
        return pairs
    n_lm = len(suite.landmark_refs)
    if n_lm >= 2:
        w = suite.landmark_weights
        sc = float(np.sum(w))
        p_off = suite.landmark_pos - w @ suite.landmark_pos / sc
        z_off = frame.landmarks - w @ frame.landmarks / sc
        for j in range(n_lm):
            if (math.sqrt(float(p_off[j] @ p_off[j])) > DISTINCT_POSITION_TOL
                    and math.sqrt(float(z_off[j] @ z_off[j]))
                    > DISTINCT_POSITION_TOL):
                pairs.append((p_off[j], z_off[j], float(w[j])))
    return pairs


def reconstruct_pose(suite: SensorSuite,
                     frame: MeasurementFrame) -> ReconstructedPose:
    """Full pose from one frame: SVD attitude, then centroid position."""
    r_y = svd_attitude(attitude_pairs(suite, frame))
    if suite.landmark_centroid is None:
        raise ValueError(
            "position reconstruction needs at least one landmark with "
            "positive total weight")
    z_c = suite.landmark_weights @ frame.landmarks / suite.landmark_weight_sum
    p_y = suite.landmark_centroid - r_y.T @ z_c
    return ReconstructedPose(R=r_y, P=p_y)


def _second_singular_value(rows: np.ndarray) -> float:
    if rows.shape[0] < 2:
        return 0.0
    s = np.linalg.svd(rows, compute_uv=False)
    return float(s[1])


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    keep = norms > DISTINCT_POSITION_TOL
    return rows[keep] / norms[keep][:, None]


def _centered_landmark_dirs(landmark_refs) -> np.ndarray:
    pos = np.array([r.position for r in landmark_refs])
    return _unit_rows(pos - pos.mean(axis=0))


def _count_distinct(landmark_refs) -> int:
    pos = [r.position for r in landmark_refs]
    kept: list[np.ndarray] = []
    for p in pos:
        if all(np.linalg.norm(p - q) > DISTINCT_POSITION_TOL for q in kept):
            kept.append(p)
    return len(kept)


def observability_check(vector_refs, landmark_refs) -> str:
    """Classify a reference configuration.

    Non-collinearity is measured by the second singular value of the
    stacked unit-direction matrix exceeding the documented tolerance,
    which is exactly the smallest singular value in the two-direction
    case and reduces to a rank-2 test in general.
    """
    v_dirs = (_unit_rows(np.array([r.direction for r in vector_refs]))
              if len(vector_refs) else np.zeros((0, 3)))
    n_lm = len(landmark_refs)
    if (n_lm >= 1 and v_dirs.shape[0] >= 2
            and _second_singular_value(v_dirs) > COLLINEARITY_TOL):
        return "vectors"
    if n_lm >= 2 and v_dirs.shape[0] >= 1:
        if _count_distinct(landmark_refs) >= 2:
            combined = np.vstack(
                [v_dirs, _centered_landmark_dirs(landmark_refs)])
            if _second_singular_value(combined) > COLLINEARITY_TOL:
                return "mixed"
    if n_lm >= 3 and _count_distinct(landmark_refs) >= 3:
        lm_dirs = _centered_landmark_dirs(landmark_refs)
        if _second_singular_value(lm_dirs) > COLLINEARITY_TOL:
            return "landmarks"
    return "unobservable"


def default_vector_refs(noise_std: float = 0.0,
                        biased: bool = False) -> list[InertialReference]:
    """The two-direction suite used throughout: gravity axis plus an
    oblique unit-normalized direction."""
    b1 = np.array([0.0, 0.0, -0.15]) if biased else np.zeros(3)
    b2 = np.array([0.1, 0.09, -0.11]) if biased else np.zeros(3)
    return [
        InertialReference(direction=E3.copy(), bias=b1, noise_std=noise_std),
        InertialReference(direction=np.array([1.0, -1.0, -1.0]), bias=b2,
                          noise_std=noise_std),
    ]
