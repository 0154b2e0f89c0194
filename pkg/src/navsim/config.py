"""Run configuration: the default scenario, config-file parsing, and
assembly of the concrete objects a run needs.

Config files are flat ``key = value`` text with dotted keys. Blank
lines and lines starting with ``#`` are skipped; unknown keys are
errors. Vector values are comma-separated numbers. The full key table
(values shown are the defaults):

    sim.dt = 0.001              tick length, seconds
    sim.t_end = 50.0            run length, seconds
    sim.seed = 0                base seed for landmark draw + noise
    vehicle.m = 2.5             mass, kg
    vehicle.g = 9.81            gravity, m/s^2
    vehicle.inertia_diag = 0.14,0.2,0.12
    observer.gamma_o = 0.1
    observer.k_o1 = 10.0
    observer.k_o2 = 10.0
    observer.k_o3 = 5.0
    observer.variant = matrix         matrix | quaternion
    quat.attitude_update = exp        exp | euler
    controller.k_c1 = 10.0
    controller.k_c2 = 0.1
    controller.k_c3 = 2.0
    controller.k_c4 = 4.0
    controller.k_theta1 = 1.0
    controller.k_theta2 = 1.0
    controller.rtilde_source = estimate   estimate | reconstruction
    truth.R0 = <9 row-major entries>      projected onto SO(3) at load
    truth.Omega0 = 0,0,0
    truth.P0 = -2,-1,0
    truth.V0 = 0,0,0
    estimate.R0 = 1,0,0,0,1,0,0,0,1
    estimate.Omega0 = 0,0,0
    estimate.P0 = 0,0,0
    estimate.V0 = 0,0,0
    estimate.theta0 = 0,0,0
    estimate.theta_dot0 = 0,0,0
    vectorN.ref / .bias / .noise_std / .weight     N = 1, 2, ...
    landmarks.count = 7             drawn uniformly in a box unless
    landmarks.center = 0,0,7        explicit landmarkN.pos keys are given
    landmarks.spread = 10,10,7
    landmarks.noise_std = 0.0
    landmarks.weight = 1.0
    landmarkN.pos / .bias / .noise_std / .weight   explicit landmarks
    trajectory.kind = figure8       figure8 | hover
    trajectory.hover_point = 0,0,4

Landmark positions are drawn once at load time from a generator seeded
with (seed, 1) so the same seed always yields the same scene; the
measurement-noise stream is seeded separately with (seed, 2) by the
harness.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .controller import (ControllerGains, DesiredTrajectory,
                         figure_eight_climb, hover_point)
from .dynamics import TrueState, VehicleParams
from .liegroup import project_rotation
from .observer import ObserverGains, ObserverState
from .sensing import InertialReference, LandmarkReference, SensorSuite

OBSERVER_VARIANTS = ("matrix", "quaternion")
ATTITUDE_UPDATES = ("exp", "euler")
RTILDE_SOURCES = ("estimate", "reconstruction")
TRAJECTORY_KINDS = ("figure8", "hover")

# Initial true attitude of the default scenario, row-major. The printed
# entries are rounded to four decimals, so the loader projects them back
# onto SO(3).
_DEFAULT_R0 = ("-0.2712,-0.7130,0.6466,"
               "0.8655,-0.4746,-0.1603,"
               "0.4212,0.5162,0.7458")

DEFAULTS: dict[str, str] = {
    "sim.dt": "0.001",
    "sim.t_end": "50.0",
    "sim.seed": "0",
    "vehicle.m": "2.5",
    "vehicle.g": "9.81",
    "vehicle.inertia_diag": "0.14,0.2,0.12",
    "observer.gamma_o": "0.1",
    "observer.k_o1": "10.0",
    "observer.k_o2": "10.0",
    "observer.k_o3": "5.0",
    "observer.variant": "matrix",
    "quat.attitude_update": "exp",
    "controller.k_c1": "10.0",
    "controller.k_c2": "0.1",
    "controller.k_c3": "2.0",
    "controller.k_c4": "4.0",
    "controller.k_theta1": "1.0",
    "controller.k_theta2": "1.0",
    "controller.rtilde_source": "estimate",
    "truth.R0": _DEFAULT_R0,
    "truth.Omega0": "0,0,0",
    "truth.P0": "-2,-1,0",
    "truth.V0": "0,0,0",
    "estimate.R0": "1,0,0,0,1,0,0,0,1",
    "estimate.Omega0": "0,0,0",
    "estimate.P0": "0,0,0",
    "estimate.V0": "0,0,0",
    "estimate.theta0": "0,0,0",
    "estimate.theta_dot0": "0,0,0",
    "vector1.ref": "0,0,1",
    "vector1.bias": "0,0,0",
    "vector1.noise_std": "0.0",
    "vector1.weight": "1.0",
    "vector2.ref": "1,-1,-1",
    "vector2.bias": "0,0,0",
    "vector2.noise_std": "0.0",
    "vector2.weight": "1.0",
    "landmarks.count": "7",
    "landmarks.center": "0,0,7",
    "landmarks.spread": "10,10,7",
    "landmarks.noise_std": "0.0",
    "landmarks.weight": "1.0",
    "trajectory.kind": "figure8",
    "trajectory.hover_point": "0,0,4",
}

# Measurement-noise std and vector biases of the noisy scenario.
NOISY_OVERRIDES: dict[str, str] = {
    "vector1.bias": "0,0,-0.15",
    "vector2.bias": "0.1,0.09,-0.11",
    "vector1.noise_std": "0.05",
    "vector2.noise_std": "0.05",
    "landmarks.noise_std": "0.05",
}

_VECTOR_KEY = re.compile(r"^vector([1-9]\d*)\.(ref|bias|noise_std|weight)$")
_LANDMARK_KEY = re.compile(
    r"^landmark([1-9]\d*)\.(pos|bias|noise_std|weight)$")


@dataclass(frozen=True)
class InitialEstimate:
    """Observer and auxiliary-system starting values."""

    R0: np.ndarray
    Omega0: np.ndarray
    P0: np.ndarray
    V0: np.ndarray
    theta0: np.ndarray
    theta_dot0: np.ndarray

    def observer_state(self) -> ObserverState:
        return ObserverState(R_hat=self.R0.copy(),
                             Omega_hat=self.Omega0.copy(),
                             P_hat=self.P0.copy(), V_hat=self.V0.copy())


@dataclass(frozen=True)
class SimConfig:
    """Everything one closed-loop or replay run needs."""

    dt: float
    t_end: float
    seed: int
    vehicle: VehicleParams
    observer_gains: ObserverGains
    controller_gains: ControllerGains
    observer_variant: str
    attitude_update: str
    rtilde_source: str
    truth0: TrueState
    estimate0: InitialEstimate
    suite: SensorSuite
    trajectory: DesiredTrajectory
    trajectory_kind: str

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError("sim.dt must be positive")
        if self.t_end < self.dt:
            raise ValueError(
                "sim.t_end must cover at least one tick of sim.dt")
        if self.observer_variant not in OBSERVER_VARIANTS:
            raise ValueError(
                f"observer.variant must be one of {OBSERVER_VARIANTS}")
        if self.attitude_update not in ATTITUDE_UPDATES:
            raise ValueError(
                f"quat.attitude_update must be one of {ATTITUDE_UPDATES}")
        if self.rtilde_source not in RTILDE_SOURCES:
            raise ValueError(
                f"controller.rtilde_source must be one of {RTILDE_SOURCES}")

    @property
    def ticks(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))


class ConfigError(ValueError):
    """Malformed config text or unknown/invalid keys."""


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key = value lines to a dict, with line numbers on errors."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if (key not in DEFAULTS and not _VECTOR_KEY.match(key)
                and not _LANDMARK_KEY.match(key)):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _floats(value: str, n: int, key: str) -> np.ndarray:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != n:
        raise ConfigError(f"{key}: expected {n} comma-separated values")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from None


def _float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from None


def _int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from None


def _matrix(value: str, key: str) -> np.ndarray:
    return _floats(value, 9, key).reshape(3, 3)


def _indexed(table: dict[str, str], pattern: re.Pattern
             ) -> dict[int, dict[str, str]]:
    groups: dict[int, dict[str, str]] = {}
    for key, value in table.items():
        m = pattern.match(key)
        if m:
            groups.setdefault(int(m.group(1)), {})[m.group(2)] = value
    return groups


def _vector_refs(table: dict[str, str]) -> list[InertialReference]:
    refs = []
    for idx in sorted(_indexed(table, _VECTOR_KEY)):
        fields = _indexed(table, _VECTOR_KEY)[idx]
        if "ref" not in fields:
            raise ConfigError(f"vector{idx}: missing vector{idx}.ref")
        refs.append(InertialReference(
            direction=_floats(fields["ref"], 3, f"vector{idx}.ref"),
            bias=_floats(fields.get("bias", "0,0,0"), 3,
                         f"vector{idx}.bias"),
            noise_std=_float(fields.get("noise_std", "0"),
                             f"vector{idx}.noise_std"),
            weight=_float(fields.get("weight", "1"), f"vector{idx}.weight")))
    return refs


def _landmark_refs(table: dict[str, str], seed: int
                   ) -> list[LandmarkReference]:
    explicit = _indexed(table, _LANDMARK_KEY)
    noise = _float(table["landmarks.noise_std"], "landmarks.noise_std")
    weight = _float(table["landmarks.weight"], "landmarks.weight")
    if explicit:
        refs = []
        for idx in sorted(explicit):
            fields = explicit[idx]
            if "pos" not in fields:
                raise ConfigError(
                    f"landmark{idx}: missing landmark{idx}.pos")
            refs.append(LandmarkReference(
                position=_floats(fields["pos"], 3, f"landmark{idx}.pos"),
                bias=_floats(fields.get("bias", "0,0,0"), 3,
                             f"landmark{idx}.bias"),
                noise_std=_float(fields.get("noise_std", str(noise)),
                                 f"landmark{idx}.noise_std"),
                weight=_float(fields.get("weight", str(weight)),
                              f"landmark{idx}.weight")))
        return refs
    count = _int(table["landmarks.count"], "landmarks.count")
    if count < 0:
        raise ConfigError("landmarks.count must be non-negative")
    center = _floats(table["landmarks.center"], 3, "landmarks.center")
    spread = _floats(table["landmarks.spread"], 3, "landmarks.spread")
    rng = np.random.default_rng([seed, 1])
    positions = center + spread * rng.uniform(-0.5, 0.5, size=(count, 3))
    return [LandmarkReference(position=pos, bias=np.zeros(3),
                              noise_std=noise, weight=weight)
            for pos in positions]


def _trajectory(table: dict[str, str]) -> tuple[DesiredTrajectory, str]:
    kind = table["trajectory.kind"]
    if kind == "figure8":
        return figure_eight_climb(), kind
    if kind == "hover":
        point = _floats(table["trajectory.hover_point"], 3,
                        "trajectory.hover_point")
        return hover_point(point), kind
    raise ConfigError(f"trajectory.kind must be one of {TRAJECTORY_KINDS}")


def build_config(overrides: dict[str, str] | None = None,
                 seed: int | None = None) -> SimConfig:
    """Defaults, then overrides, then an explicit seed, to a SimConfig."""
    table = dict(DEFAULTS)
    if overrides:
        for key in overrides:
            if (key not in DEFAULTS and not _VECTOR_KEY.match(key)
                    and not _LANDMARK_KEY.match(key)):
                raise ConfigError(f"unknown key {key!r}")
        table.update(overrides)
    if seed is not None:
        table["sim.seed"] = str(seed)

    seed_val = _int(table["sim.seed"], "sim.seed")
    vehicle = VehicleParams(
        m=_float(table["vehicle.m"], "vehicle.m"),
        J=np.diag(_floats(table["vehicle.inertia_diag"], 3,
                          "vehicle.inertia_diag")),
        g=_float(table["vehicle.g"], "vehicle.g"))
    observer_gains = ObserverGains(
        gamma_o=_float(table["observer.gamma_o"], "observer.gamma_o"),
        k_o1=_float(table["observer.k_o1"], "observer.k_o1"),
        k_o2=_float(table["observer.k_o2"], "observer.k_o2"),
        k_o3=_float(table["observer.k_o3"], "observer.k_o3"))
    controller_gains = ControllerGains(
        k_c1=_float(table["controller.k_c1"], "controller.k_c1"),
        k_c2=_float(table["controller.k_c2"], "controller.k_c2"),
        k_c3=_float(table["controller.k_c3"], "controller.k_c3"),
        k_c4=_float(table["controller.k_c4"], "controller.k_c4"),
        k_theta1=_float(table["controller.k_theta1"],
                        "controller.k_theta1"),
        k_theta2=_float(table["controller.k_theta2"],
                        "controller.k_theta2"))
    truth0 = TrueState(
        R=project_rotation(_matrix(table["truth.R0"], "truth.R0")),
        Omega=_floats(table["truth.Omega0"], 3, "truth.Omega0"),
        P=_floats(table["truth.P0"], 3, "truth.P0"),
        V=_floats(table["truth.V0"], 3, "truth.V0"))
    estimate0 = InitialEstimate(
        R0=project_rotation(_matrix(table["estimate.R0"], "estimate.R0")),
        Omega0=_floats(table["estimate.Omega0"], 3, "estimate.Omega0"),
        P0=_floats(table["estimate.P0"], 3, "estimate.P0"),
        V0=_floats(table["estimate.V0"], 3, "estimate.V0"),
        theta0=_floats(table["estimate.theta0"], 3, "estimate.theta0"),
        theta_dot0=_floats(table["estimate.theta_dot0"], 3,
                           "estimate.theta_dot0"))
    suite = SensorSuite(vector_refs=_vector_refs(table),
                        landmark_refs=_landmark_refs(table, seed_val))
    trajectory, kind = _trajectory(table)
    return SimConfig(
        dt=_float(table["sim.dt"], "sim.dt"),
        t_end=_float(table["sim.t_end"], "sim.t_end"),
        seed=seed_val,
        vehicle=vehicle,
        observer_gains=observer_gains,
        controller_gains=controller_gains,
        observer_variant=table["observer.variant"],
        attitude_update=table["quat.attitude_update"],
        rtilde_source=table["controller.rtilde_source"],
        truth0=truth0,
        estimate0=estimate0,
        suite=suite,
        trajectory=trajectory,
        trajectory_kind=kind)


def load_config(path: str, seed: int | None = None) -> SimConfig:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return build_config(parse_config_text(text), seed=seed)


def default_config(seed: int = 0) -> SimConfig:
    """The noise-free, bias-free default scenario."""
    return build_config(seed=seed)


def noisy_config(seed: int = 0) -> SimConfig:
    """Default scenario plus measurement noise and constant vector
    biases."""
    return build_config(dict(NOISY_OVERRIDES), seed=seed)
