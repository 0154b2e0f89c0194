"""Fast built-in self checks, each printing one PASS/FAIL line.

These are smoke-level mirrors of the full pytest suite: small sample
counts and short runs so the whole table finishes in well under a
minute. The authoritative gate is `pytest`; this command exists so an
installed copy can be sanity-checked without the test sources.
"""

from __future__ import annotations

import numpy as np

from . import liegroup as lg
from .config import build_config, default_config
from .harness import emit_replay_logs, run_closed_loop, run_replay
from .sensing import reconstruct_pose, synth_frame


def _check_algebra() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        a = rng.normal(size=(3, 3))
        y = rng.normal(size=3)
        th = rng.normal(size=3)
        r = lg.so3_exp(th)
        worst = max(
            worst,
            float(np.max(np.abs(lg.skew(r @ y) - r @ lg.skew(y) @ r.T))),
            abs(float(np.trace(a @ lg.skew(y))) + 2.0 * lg.pa_vex(a) @ y),
            float(np.max(np.abs(lg.vex(lg.skew(y)) - y))))
    return worst <= 1e-12, f"worst identity residual {worst:.3g}"


def _check_pose_reconstruction() -> tuple[bool, str]:
    rng = np.random.default_rng(12)
    suite_cfg = default_config(seed=0).suite
    worst = 0.0
    for _ in range(100):
        r = lg.project_rotation(rng.normal(size=(3, 3)))
        p = rng.normal(scale=5.0, size=3)
        frame = synth_frame(suite_cfg, r, p, rng, 0.0)
        pose = reconstruct_pose(suite_cfg, frame)
        worst = max(worst, float(np.max(np.abs(pose.R - r))),
                    float(np.max(np.abs(pose.P - p))))
    return worst <= 1e-10, f"worst clean recovery error {worst:.3g}"


def _check_equilibrium() -> tuple[bool, str]:
    overrides = {
        "trajectory.kind": "hover",
        "trajectory.hover_point": "0,0,4",
        "truth.P0": "0,0,4",
        "truth.R0": "1,0,0,0,1,0,0,0,1",
        "estimate.P0": "0,0,4",
        "sim.t_end": "1.0",
    }
    cfg = build_config(overrides, seed=0)
    rec = run_closed_loop(cfg)
    worst = float(rec.rows[:, 24:31].max())
    return worst <= 1e-6, f"largest error norm while hovering {worst:.3g}"


def _check_convergence() -> tuple[bool, str]:
    cfg = build_config({"sim.t_end": "12.0"}, seed=0)
    rec = run_closed_loop(cfg)
    tail = rec.rows[rec.rows[:, 0] >= 10.0]
    e_r = float(tail[:, 24].max())
    e_p = float(tail[:, 26].max())
    e_v = float(tail[:, 27].max())
    ok = e_r <= 1e-3 and e_p <= 1e-2 and e_v <= 1e-2
    thrust = rec.rows[:, 34]
    ok = ok and float(thrust.min()) >= 0.0 and float(thrust.max()) <= 30.725
    return ok, (f"after 10 s: eR_o {e_r:.3g}, eP_o {e_p:.3g}, "
                f"eV_o {e_v:.3g}; thrust within [0, 30.725]")


def _check_determinism() -> tuple[bool, str]:
    from .config import NOISY_OVERRIDES

    overrides = dict(NOISY_OVERRIDES)
    overrides["sim.t_end"] = "1.0"
    cfg = build_config(overrides, seed=3)
    a = run_closed_loop(cfg)
    b = run_closed_loop(cfg)
    same = a.rows.shape == b.rows.shape and bool(np.all(a.rows == b.rows))
    return same, "two same-seed runs agree bitwise"


def _check_self_replay(tmp_dir: str) -> tuple[bool, str]:
    cfg = build_config({"sim.t_end": "1.5"}, seed=0)
    rec = run_closed_loop(cfg, keep_measurements=True)
    paths = emit_replay_logs(rec, cfg, tmp_dir)
    replayed = run_replay(paths["landmarks"], paths["truth"], cfg,
                          vectors_log=paths.get("vectors"),
                          inputs_log=paths["inputs"])
    gap = float(np.max(np.abs(replayed.rows[:, [24, 26, 27]]
                              - rec.rows[1:, [24, 26, 27]])))
    return gap <= 1e-9, f"replayed observer errors match to {gap:.3g}"


def _check_quat_agreement() -> tuple[bool, str]:
    cfg_m = build_config({"sim.t_end": "2.0"}, seed=0)
    cfg_q = build_config({"sim.t_end": "2.0",
                          "observer.variant": "quaternion"}, seed=0)
    rec_m = run_closed_loop(cfg_m)
    rec_q = run_closed_loop(cfg_q)
    gap = float(np.max(np.abs(rec_m.rows - rec_q.rows)))
    return gap <= 1e-6, f"variant output gap {gap:.3g}"


def run_all(out=print) -> bool:
    import tempfile

    checks = [
        ("algebra-identities", _check_algebra),
        ("pose-reconstruction", _check_pose_reconstruction),
        ("hover-equilibrium", _check_equilibrium),
        ("clean-convergence", _check_convergence),
        ("determinism", _check_determinism),
        ("quaternion-agreement", _check_quat_agreement),
    ]
    all_ok = True
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as e:  # surface, keep the table going
            ok, detail = False, f"raised {type(e).__name__}: {e}"
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name:24s} {detail}")
    with tempfile.TemporaryDirectory() as tmp:
        try:
            ok, detail = _check_self_replay(tmp)
        except Exception as e:
            ok, detail = False, f"raised {type(e).__name__}: {e}"
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {'self-replay':24s} {detail}")
    return all_ok
