"""Discrete closed-loop simulation at a fixed tick rate, observer-only
replay of recorded measurement logs, and CSV emission.

Tick structure of the closed loop: every quantity of row k is evaluated
at t_k. The frame is measured from the true state, the pose is
reconstructed, the thrust command is formed from the saturation filter,
the desired-attitude chain is evaluated from the estimate's own rates,
and the torque closes the loop. Truth and estimate then advance to
t_{k+1} together, driven by the same (torque, thrust) pair, with the
estimate's correction built from this tick's measurement against the
pre-advance attitude. The recorded estimate of row k is therefore the
one held at t_k, before that tick's measurement is folded in.

Replay consumes the landmark log format written by emit_replay_logs
(one row per landmark per timestamp) plus a ground-truth log for error
evaluation; vector-measurement and input logs are optional extensions.
Without an input log the observer runs prediction-only on the torque
channel and with zero thrust, and the summary flags that mode. Frame
gaps larger than the nominal tick are bridged with prediction-only
sub-steps, counted in the summary. A degenerate frame (measurements
that cannot pin down the pose) also falls back to a prediction-only
step in replay; in the closed loop it is an error carrying the tick
index.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import liegroup as lg
from .config import SimConfig
from .controller import (AuxiliaryState, DesiredAttitude, aux_theta_step,
                         control_errors, desired_angular_velocity,
                         desired_attitude, intermediary_F, thrust_command,
                         torque)
from .dynamics import ControlCommand, TrueState, integrate_step
from .observer import (CorrectionTerms, ObserverState,
                       angular_velocity_step, correction_factors,
                       estimate_rates, predict_correct_step)
from .quatvariant import (QuatObserverState, quat_attitude_step,
                          quat_corrections, quat_errors, quat_torque)
from .sensing import (DegenerateGeometryError, InertialReference,
                      LandmarkReference, MeasurementFrame,
                      ReconstructedPose, SensorSuite, observability_check,
                      reconstruct_pose, synth_frame)

CSV_COLUMNS = ("t", "qw", "qx", "qy", "qz", "Px", "Py", "Pz",
               "Vx", "Vy", "Vz", "qw_hat", "qx_hat", "qy_hat", "qz_hat",
               "Px_hat", "Py_hat", "Pz_hat", "Vx_hat", "Vy_hat", "Vz_hat",
               "Pd_x", "Pd_y", "Pd_z", "eR_o", "eOm_o", "eP_o", "eV_o",
               "eR_c", "eP_c", "eV_c", "Tx", "Ty", "Tz", "thrust")
CSV_HEADER = ",".join(CSV_COLUMNS)

LANDMARK_LOG_HEADER = "t,j,px,py,pz,zx,zy,zz,s"
VECTOR_LOG_HEADER = "t,i,vx,vy,vz,yx,yy,yz,s"
TRUTH_LOG_HEADER = "t,qw,qx,qy,qz,Px,Py,Pz,Vx,Vy,Vz"
INPUTS_LOG_HEADER = "t,Tx,Ty,Tz,thrust"

# Desired-rate computation is frozen at the previous tick's values when
# the thrust direction passes this close to the singular ray, relative
# to gravity.
NEAR_SINGULAR_RATE_BAND = 1e-6


@dataclass
class RunRecord:
    """One run's per-tick table, summary metrics, and (optionally) the
    raw measurement frames for replay-log emission."""

    rows: np.ndarray
    summary: dict[str, float | int | str]
    frames: list[MeasurementFrame] | None = None


def _norm3(d: np.ndarray) -> float:
    return math.sqrt(float(d @ d))


def _row(t: float, truth: TrueState, r_hat: np.ndarray, om_hat: np.ndarray,
         p_hat: np.ndarray, v_hat: np.ndarray, pd: np.ndarray,
         vd: np.ndarray, r_d: np.ndarray, tq: np.ndarray,
         thrust: float) -> list[float]:
    r_tilde = truth.R @ r_hat.T
    q_truth = lg.rotation_to_quat(truth.R)
    q_hat = lg.rotation_to_quat(r_hat)
    return [t,
            q_truth[0], q_truth[1], q_truth[2], q_truth[3],
            truth.P[0], truth.P[1], truth.P[2],
            truth.V[0], truth.V[1], truth.V[2],
            q_hat[0], q_hat[1], q_hat[2], q_hat[3],
            p_hat[0], p_hat[1], p_hat[2],
            v_hat[0], v_hat[1], v_hat[2],
            pd[0], pd[1], pd[2],
            lg.attitude_distance(r_tilde),
            _norm3(truth.Omega - r_tilde @ om_hat),
            _norm3(truth.P - p_hat),
            _norm3(truth.V - v_hat),
            lg.attitude_distance(truth.R @ r_d.T),
            _norm3(truth.P - pd),
            _norm3(truth.V - vd),
            tq[0], tq[1], tq[2], thrust]


def _steady_state_summary(rows: np.ndarray) -> dict[str, float]:
    t = rows[:, 0]
    window = t >= t[-1] - 0.2 * (t[-1] - t[0]) - 1e-12
    names = ("eR_o", "eOm_o", "eP_o", "eV_o", "eR_c", "eP_c", "eV_c")
    out: dict[str, float] = {}
    for i, name in enumerate(names):
        col = rows[:, 24 + i]
        out[f"ss_{name}"] = float(col[window].mean())
        out[f"max_{name}"] = float(col.max())
    return out


def run_closed_loop(cfg: SimConfig,
                    keep_measurements: bool = False) -> RunRecord:
    """Simulate the vehicle, observer, and controller as one discrete
    loop; returns the per-tick record with summary metrics attached."""
    if observability_check(list(cfg.suite.vector_refs),
                           list(cfg.suite.landmark_refs)) == "unobservable":
        raise ValueError("sensor suite cannot pin down the pose")
    p = cfg.vehicle
    og = cfg.observer_gains
    cg = cfg.controller_gains
    dt = cfg.dt
    n = cfg.ticks
    quat_mode = cfg.observer_variant == "quaternion"
    rng = np.random.default_rng([cfg.seed, 2])

    truth = cfg.truth0
    est = cfg.estimate0.observer_state()
    q_hat = lg.rotation_to_quat(cfg.estimate0.R0) if quat_mode else None
    aux = AuxiliaryState(theta=cfg.estimate0.theta0.copy(),
                         theta_dot=cfg.estimate0.theta_dot0.copy(),
                         theta_ddot=np.zeros(3))
    om_d_prev = np.zeros(3)
    om_d_dot_prev = np.zeros(3)
    repairs = 0
    rate_freezes = 0
    drift_max = 0.0

    rows = np.empty((n + 1, len(CSV_COLUMNS)))
    frames: list[MeasurementFrame] | None = [] if keep_measurements else None
    started = time.perf_counter()

    for k in range(n + 1):
        t = k * dt
        sample = cfg.trajectory.sample(t)

        frame = synth_frame(cfg.suite, truth.R, truth.P, rng, t)
        if frames is not None:
            frames.append(frame)
        try:
            pose = reconstruct_pose(cfg.suite, frame)
        except DegenerateGeometryError as e:
            raise DegenerateGeometryError(
                f"tick {k} (t = {t:.6g} s): {e}") from e

        # The filter advance computes the acceleration belonging to the
        # current (theta, theta_dot), so the thrust and the derivative
        # chain are evaluated on the pre-advance point paired with it.
        aux_next = aux_theta_step(aux, est, sample, cg, dt)
        aux_now = AuxiliaryState(theta=aux.theta, theta_dot=aux.theta_dot,
                                 theta_ddot=aux_next.theta_ddot)
        _, thrust_k = thrust_command(aux_now, sample, cg, p)

        if quat_mode:
            q_y = lg.rotation_to_quat(pose.R)
            w = quat_corrections(
                QuatObserverState(Q_hat=q_hat, Omega_hat=est.Omega_hat,
                                  P_hat=est.P_hat, V_hat=est.V_hat),
                q_y, pose.P, thrust_k, p, og)
        else:
            w = correction_factors(pose, est, thrust_k, p, og)

        rates = estimate_rates(est, w, thrust_k, p)
        ic = intermediary_F(aux_now, sample, rates, cg, p)
        q_d, r_d = desired_attitude(ic, p)
        if ic.alpha2 < NEAR_SINGULAR_RATE_BAND * p.g:
            om_d, om_d_dot = om_d_prev, om_d_dot_prev
            rate_freezes += 1
        else:
            om_d, om_d_dot = desired_angular_velocity(ic, p)
            om_d_prev, om_d_dot_prev = om_d, om_d_dot
        des = DesiredAttitude(Q_d=q_d, R_d=r_d, Omega_d=om_d,
                              Omega_d_dot=om_d_dot)

        pred = predict_correct_step(est, w, thrust_k, p, dt)
        if quat_mode:
            q_hat_new, drift = quat_attitude_step(
                q_hat, est.Omega_hat, w.w_Omega, dt, cfg.attitude_update)
            r_new = lg.quat_to_rotation(q_hat_new)
            if drift > drift_max:
                drift_max = drift
        else:
            r_new, fixed = lg.repair_rotation(pred.R_hat)
            repairs += int(fixed)

        # Torque from the freshest attitude knowledge (this tick's
        # measurement folded in); the angular-velocity estimate updates
        # afterwards, driven by the same torque the plant receives.
        if quat_mode:
            q_ctrl = q_hat_new if cfg.rtilde_source == "estimate" else q_y
            torque_k = quat_torque(quat_errors(q_ctrl, q_y, q_d),
                                   est.Omega_hat, des, p, cg)
        else:
            r_ctrl = r_new if cfg.rtilde_source == "estimate" else pose.R
            errs = control_errors(r_ctrl, est.Omega_hat, pred.P_hat,
                                  pred.V_hat, des, sample)
            torque_k = torque(errs, w.R_tilde_o, est.Omega_hat, des, p, cg)

        rows[k] = _row(t, truth, est.R_hat, est.Omega_hat, est.P_hat,
                       est.V_hat, sample.pos, sample.vel, r_d, torque_k,
                       thrust_k)

        if k == n:
            break

        om_new = angular_velocity_step(
            ObserverState(R_hat=r_new, Omega_hat=est.Omega_hat,
                          P_hat=pred.P_hat, V_hat=pred.V_hat),
            w, torque_k, p, dt)
        est = ObserverState(R_hat=r_new, Omega_hat=om_new,
                            P_hat=pred.P_hat, V_hat=pred.V_hat)
        if quat_mode:
            q_hat = q_hat_new
        aux = aux_next
        truth = integrate_step(
            truth, ControlCommand(torque=torque_k, thrust=thrust_k), p, dt)

    wall = time.perf_counter() - started
    summary: dict[str, float | int | str] = {
        "mode": "closed_loop",
        "variant": cfg.observer_variant,
        "trajectory": cfg.trajectory_kind,
        "seed": cfg.seed,
        "dt": dt,
        "t_end": cfg.t_end,
        "ticks": n,
        "wall_time_s": wall,
        "rotation_repairs": repairs,
        "desired_rate_freezes": rate_freezes,
        "quat_norm_drift_max": drift_max,
    }
    summary.update(_steady_state_summary(rows))
    return RunRecord(rows=rows, summary=summary, frames=frames)


def _format_value(v: float | int | str) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    return format(v, ".17g")


def emit(record: RunRecord, out_dir: str) -> dict[str, str]:
    """Write run.csv (17 significant digits) and summary.txt."""
    os.makedirs(out_dir, exist_ok=True)
    run_path = os.path.join(out_dir, "run.csv")
    with open(run_path, "w", encoding="utf-8") as f:
        f.write(CSV_HEADER + "\n")
        np.savetxt(f, record.rows, fmt="%.17g", delimiter=",")
    summary_path = os.path.join(out_dir, "summary.txt")
    with open(summary_path, "w", encoding="utf-8") as f:
        for key, value in record.summary.items():
            f.write(f"{key} = {_format_value(value)}\n")
    return {"run": run_path, "summary": summary_path}


def emit_replay_logs(record: RunRecord, cfg: SimConfig,
                     out_dir: str) -> dict[str, str]:
    """Write the measurement, truth, and input logs that run_replay
    consumes; requires a record kept with keep_measurements=True."""
    if record.frames is None:
        raise ValueError(
            "record has no measurement frames; rerun with "
            "keep_measurements=True")
    if len(record.frames) != record.rows.shape[0]:
        raise ValueError("frame count does not match the row count")
    os.makedirs(out_dir, exist_ok=True)
    paths: dict[str, str] = {}

    times = record.rows[:, 0]
    n_land = len(cfg.suite.landmark_refs)
    land_rows = np.empty((len(record.frames) * n_land, 9))
    for i, frame in enumerate(record.frames):
        for j in range(n_land):
            land_rows[i * n_land + j] = [
                times[i], j + 1,
                *cfg.suite.landmark_pos[j], *frame.landmarks[j],
                cfg.suite.landmark_weights[j]]
    paths["landmarks"] = os.path.join(out_dir, "landmarks.csv")
    with open(paths["landmarks"], "w", encoding="utf-8") as f:
        f.write(LANDMARK_LOG_HEADER + "\n")
        np.savetxt(f, land_rows, fmt="%.17g", delimiter=",")

    n_vec = len(cfg.suite.vector_refs)
    if n_vec:
        vec_rows = np.empty((len(record.frames) * n_vec, 9))
        for i, frame in enumerate(record.frames):
            for j in range(n_vec):
                vec_rows[i * n_vec + j] = [
                    times[i], j + 1,
                    *cfg.suite.vector_dirs[j], *frame.vectors[j],
                    cfg.suite.vector_weights[j]]
        paths["vectors"] = os.path.join(out_dir, "vectors.csv")
        with open(paths["vectors"], "w", encoding="utf-8") as f:
            f.write(VECTOR_LOG_HEADER + "\n")
            np.savetxt(f, vec_rows, fmt="%.17g", delimiter=",")

    paths["truth"] = os.path.join(out_dir, "truth.csv")
    with open(paths["truth"], "w", encoding="utf-8") as f:
        f.write(TRUTH_LOG_HEADER + "\n")
        np.savetxt(f, record.rows[:, :11], fmt="%.17g", delimiter=",")

    paths["inputs"] = os.path.join(out_dir, "inputs.csv")
    with open(paths["inputs"], "w", encoding="utf-8") as f:
        f.write(INPUTS_LOG_HEADER + "\n")
        np.savetxt(f, record.rows[:, [0, 31, 32, 33, 34]], fmt="%.17g",
                   delimiter=",")
    return paths


def _load_log(path: str, header: str, n_cols: int) -> np.ndarray:
    """CSV rows to a float array, reporting the line number on any
    malformed row."""
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().rstrip("\n")
        if first.strip() != header:
            raise ValueError(f"{path}: expected header {header!r}")
        data: list[list[float]] = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != n_cols:
                raise ValueError(
                    f"{path} line {lineno}: expected {n_cols} columns, "
                    f"got {len(parts)}")
            try:
                data.append([float(x) for x in parts])
            except ValueError:
                raise ValueError(
                    f"{path} line {lineno}: non-numeric field") from None
    return np.array(data) if data else np.zeros((0, n_cols))


def _group_frames(rows: np.ndarray, what: str
                  ) -> tuple[np.ndarray, list[np.ndarray]]:
    """Split log rows into per-timestamp blocks, in file order."""
    t = rows[:, 0]
    if np.any(np.diff(t) < 0.0):
        raise ValueError(f"{what} log timestamps must be non-decreasing")
    boundaries = np.flatnonzero(np.diff(t) != 0.0) + 1
    blocks = np.split(rows, boundaries)
    times = np.array([b[0, 0] for b in blocks])
    return times, blocks


def _prediction_corrections(p) -> CorrectionTerms:
    # w_a at its equilibrium value turns the correction step into pure
    # model propagation under gravity and thrust.
    return CorrectionTerms(w_o=np.zeros(3), w_Omega=np.zeros(3),
                           w_V=np.zeros(3), w_a=-p.g * lg.E3,
                           R_tilde_o=np.eye(3), P_tilde_o=np.zeros(3))


def _observer_tick(est: ObserverState, q_hat: np.ndarray | None,
                   pose: ReconstructedPose | None, thrust: float,
                   tq: np.ndarray, cfg: SimConfig, dt: float
                   ) -> tuple[ObserverState, np.ndarray | None, float]:
    """One replay tick for either variant; pose=None is prediction-only.
    Returns the new estimate, quaternion (if used), and norm drift."""
    p = cfg.vehicle
    drift = 0.0
    if pose is None:
        w = _prediction_corrections(p)
    elif q_hat is not None:
        w = quat_corrections(
            QuatObserverState(Q_hat=q_hat, Omega_hat=est.Omega_hat,
                              P_hat=est.P_hat, V_hat=est.V_hat),
            lg.rotation_to_quat(pose.R), pose.P, thrust, p,
            cfg.observer_gains)
    else:
        w = correction_factors(pose, est, thrust, p, cfg.observer_gains)
    pred = predict_correct_step(est, w, thrust, p, dt)
    if q_hat is not None:
        q_new, drift = quat_attitude_step(q_hat, est.Omega_hat, w.w_Omega,
                                          dt, cfg.attitude_update)
        r_new = lg.quat_to_rotation(q_new)
    else:
        q_new = None
        r_new, _ = lg.repair_rotation(pred.R_hat)
    om_new = angular_velocity_step(
        ObserverState(R_hat=r_new, Omega_hat=est.Omega_hat,
                      P_hat=pred.P_hat, V_hat=pred.V_hat), w, tq, p, dt)
    return (ObserverState(R_hat=r_new, Omega_hat=om_new, P_hat=pred.P_hat,
                          V_hat=pred.V_hat), q_new, drift)


def _nearest_within(times: np.ndarray, t: float, tol: float,
                    what: str) -> int:
    idx = int(np.searchsorted(times, t))
    best = -1
    best_gap = tol
    for j in (idx - 1, idx):
        if 0 <= j < len(times):
            gap = abs(float(times[j]) - t)
            if gap <= best_gap:
                best = j
                best_gap = gap
    if best < 0:
        raise ValueError(f"no {what} row within {tol:.3g} s of t = {t!r}")
    return best


def _frame_suite(land_block: np.ndarray,
                 vec_block: np.ndarray | None
                 ) -> tuple[SensorSuite, MeasurementFrame]:
    vec_refs = []
    vec_meas = np.zeros((0, 3))
    if vec_block is not None:
        vec_refs = [InertialReference(direction=row[2:5], bias=np.zeros(3),
                                      noise_std=0.0, weight=float(row[8]))
                    for row in vec_block]
        vec_meas = vec_block[:, 5:8]
    land_refs = [LandmarkReference(position=row[2:5], bias=np.zeros(3),
                                   noise_std=0.0, weight=float(row[8]))
                 for row in land_block]
    suite = SensorSuite(vector_refs=vec_refs, landmark_refs=land_refs)
    frame = MeasurementFrame(t=float(land_block[0, 0]), vectors=vec_meas,
                             landmarks=land_block[:, 5:8])
    return suite, frame


def run_replay(measurement_log: str, ground_truth_log: str, cfg: SimConfig,
               vectors_log: str | None = None,
               inputs_log: str | None = None) -> RunRecord:
    """Advance the observer over a recorded measurement log and score it
    against the ground-truth log; one output row per frame.

    Row k holds the estimate as of frame k's timestamp, before that
    frame's correction, mirroring the closed loop's row semantics. The
    controller never runs: desired-trajectory and control-error columns
    are written as zeros. The truth log carries no angular velocity, so
    eOm_o is written as zero as well.
    """
    land_rows = _load_log(measurement_log, LANDMARK_LOG_HEADER, 9)
    if land_rows.shape[0] == 0:
        raise ValueError(f"{measurement_log}: empty measurement log")
    truth_rows = _load_log(ground_truth_log, TRUTH_LOG_HEADER, 11)
    if truth_rows.shape[0] == 0:
        raise ValueError(f"{ground_truth_log}: empty ground-truth log")
    frame_times, land_blocks = _group_frames(land_rows, "measurement")

    vec_blocks: list[np.ndarray] | None = None
    if vectors_log is not None:
        vec_rows = _load_log(vectors_log, VECTOR_LOG_HEADER, 9)
        vec_times, vec_blocks = _group_frames(vec_rows, "vector")
        if (len(vec_times) != len(frame_times)
                or np.any(vec_times != frame_times)):
            raise ValueError(
                "vector log timestamps must match the measurement log")

    input_rows: np.ndarray | None = None
    if inputs_log is not None:
        input_rows = _load_log(inputs_log, INPUTS_LOG_HEADER, 5)
        if input_rows.shape[0] == 0:
            raise ValueError(f"{inputs_log}: empty inputs log")

    quat_mode = cfg.observer_variant == "quaternion"
    est = cfg.estimate0.observer_state()
    q_hat = lg.rotation_to_quat(cfg.estimate0.R0) if quat_mode else None
    truth_t = truth_rows[:, 0]

    rows = np.empty((len(land_blocks), len(CSV_COLUMNS)))
    dropout_ticks = 0
    degenerate_frames = 0
    drift_max = 0.0
    started = time.perf_counter()

    for i, block in enumerate(land_blocks):
        t_f = float(frame_times[i])
        if input_rows is not None:
            j_in = _nearest_within(input_rows[:, 0], t_f, cfg.dt / 2.0,
                                   "inputs")
            torque_f = input_rows[j_in, 1:4]
            thrust_f = float(input_rows[j_in, 4])
        else:
            torque_f = np.zeros(3)
            thrust_f = 0.0

        j = _nearest_within(truth_t, t_f, cfg.dt / 2.0, "ground-truth")
        truth_r = lg.quat_to_rotation(truth_rows[j, 1:5])
        rows[i] = [t_f, *truth_rows[j, 1:11],
                   *lg.rotation_to_quat(est.R_hat), *est.P_hat, *est.V_hat,
                   0.0, 0.0, 0.0,
                   lg.attitude_distance(truth_r @ est.R_hat.T), 0.0,
                   _norm3(truth_rows[j, 5:8] - est.P_hat),
                   _norm3(truth_rows[j, 8:11] - est.V_hat),
                   0.0, 0.0, 0.0,
                   *torque_f, thrust_f]

        if i + 1 == len(land_blocks):
            break
        gap = float(frame_times[i + 1]) - t_f
        if gap <= 0.0:
            raise ValueError(
                f"frame at t = {frame_times[i + 1]!r} repeats a timestamp")
        n_sub = max(1, int(round(gap / cfg.dt)))
        dt_step = gap / n_sub

        suite, frame = _frame_suite(
            block, vec_blocks[i] if vec_blocks is not None else None)
        try:
            pose = reconstruct_pose(suite, frame)
        except DegenerateGeometryError:
            pose = None
            degenerate_frames += 1
        est, q_hat, drift = _observer_tick(est, q_hat, pose, thrust_f,
                                           torque_f, cfg, dt_step)
        drift_max = max(drift_max, drift)
        # Bridge a dropout gap with prediction-only sub-steps holding
        # the last inputs.
        for _ in range(n_sub - 1):
            est, q_hat, drift = _observer_tick(est, q_hat, None, thrust_f,
                                               torque_f, cfg, dt_step)
            drift_max = max(drift_max, drift)
            dropout_ticks += 1

    summary: dict[str, float | int | str] = {
        "mode": "replay",
        "variant": cfg.observer_variant,
        "inputs_available": int(input_rows is not None),
        "frames": len(land_blocks),
        "dropout_ticks": dropout_ticks,
        "degenerate_frames": degenerate_frames,
        "wall_time_s": time.perf_counter() - started,
        "quat_norm_drift_max": drift_max,
    }
    summary.update(_steady_state_summary(rows))
    return RunRecord(rows=rows, summary=summary, frames=None)


def load_run_csv(path: str) -> np.ndarray:
    """Read back an emitted run.csv, validating the header."""
    return _load_log(path, CSV_HEADER, len(CSV_COLUMNS))
