"""Scenario configuration: defaults, YAML loading, strict validation.

The config file is YAML with one flat section per module. Unknown keys are
hard errors so a typo in a gain name cannot silently fall back to a default.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .admittance import AdmittanceController, AdmittanceGains, WrenchEstimator
from .allocation import SafetyAllocator, SafetyParams
from .payload_control import PayloadController, PayloadGains
from .robot_control import CableGains, RobotController
from .sim import BodyParams, CableParams, NoiseConfig, SystemParams
from .ukf import TensionUkf, UkfNoise


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


DEFAULTS: dict = {
    "seed": 0,
    "team": {
        "n": 3,
        "attach_radius": 0.5,        # attach points on a circle, payload frame
        "attach_points": None,       # explicit (n,3) override
        "payload_start": [0.0, 0.0, 1.0],
    },
    "payload": {
        "mass": 0.310,
        "inertia": [0.039, 0.039, 0.0775],
    },
    "quadrotor": {
        "mass": 0.25,
        "inertia": [2.1e-3, 2.1e-3, 4.0e-3],
        "motor_constant": 1.0e-6,
        "max_thrust": 8.0,
    },
    "cable": {
        "length": 1.0,
        "stiffness": 5000.0,
        "damping": 20.0,
    },
    "simulation": {
        "sim_dt": 1.25e-3,
        "control_dt": 2.5e-3,
        "measurement_dt": 1.0e-2,
        "duration": 10.0,
        "init_at_equilibrium": True,
    },
    "noise": {
        "enabled": True,
        "pos": 1.0e-3,
        "vel": 1.0e-2,
        "euler": 3.5e-3,
        "omega": 5.0e-3,
        "cable_dir": 2.0e-3,
        "cable_rate": 1.0e-2,
        "payload_pos": 1.0e-3,
        "payload_vel": 1.0e-2,
        "payload_rot": 3.5e-3,
        "payload_omega": 5.0e-3,
    },
    "payload_controller": {
        "kp": [8.0, 8.0, 8.0],
        "kd": [5.2, 5.2, 5.2],
        "ki": [4.5, 4.5, 4.5],
        "integral_clamp": [1.5, 1.5, 1.5],
        # yaw authority passes through cable tilting, so the yaw axis runs a
        # slower loop than roll/pitch
        "kr": [0.62, 0.62, 0.31],
        "komega": [0.28, 0.28, 0.28],
    },
    "robot_controller": {
        # cascade separation: payload position ~2.8 rad/s, cable direction
        # ~10 rad/s, body attitude ~80 rad/s
        "kq": [100.0, 100.0, 100.0],
        "komega": [16.0, 16.0, 16.0],
        "kr": [13.4, 13.4, 13.4],
        "komega_att": [0.30, 0.30, 0.30],
        "qdot_cutoff_hz": 8.0,
        "yaw": 0.0,
    },
    "allocator": {
        "mode": "off",
        "gain": 0.05,
        "decay": 3.0,
        "human_radius": 1.0,
        "robot_radius": 0.75,
        "max_iterations": 25,
        "tolerance": 1.0e-6,
        "penalty_growth": 10.0,
        "max_tension": 5.0,
    },
    "ukf": {
        "alpha": 1.0e-3,
        "beta": 2.0,
        "kappa": 0.0,
        # per-control-step process noise; the cable rows absorb the residual
        # attach-point model error during maneuvers
        "sigma_thrust": 0.05,
        "sigma_tension": 0.025,
        "sigma_cable_dir": 5.0e-4,
        "sigma_moment": 0.01,
        "sigma_omega": 0.01,
        "sigma_cable_rate": 0.025,
        "init_tension_var": 0.25,
        "init_cov_scale": 1.0,
    },
    "admittance": {
        "enabled": True,
        "mass": [0.25, 0.25, 0.25, 0.1, 0.1, 0.1],
        "damping": [1.25, 1.25, 1.25, 5.0, 5.0, 5.0],
        "stiffness": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "wrench_lowpass_hz": 10.0,
    },
    "reference": {
        "type": "hover",            # hover | waypoints
        "position": [0.0, 0.0, 1.0],
        "yaw": 0.0,
        "waypoints": [],            # [{time, position}], min-jerk segments
    },
    "script": {
        # timed external wrenches: {time, duration, force, moment, ramp}
        "wrenches": [],
        # human walk: {start, end, start_time, speed} or explicit
        # waypoints [{time, position}]
        "human": None,
    },
    "service": {
        "port": 8765,
        "frame_stride": 10,
        "realtime": True,
    },
}


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(defaults[key], dict) and defaults[key]:
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be a mapping")
            out[key] = _merge(defaults[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ScenarioConfig:
    """Validated scenario description plus factories for the stack."""

    raw: dict

    @classmethod
    def from_dict(cls, override: dict | None = None) -> "ScenarioConfig":
        cfg = cls(_merge(DEFAULTS, override or {}))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict(data)

    def override(self, override: dict) -> "ScenarioConfig":
        cfg = ScenarioConfig(_merge(self.raw, override))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        sim = self.raw["simulation"]
        ratio = sim["control_dt"] / sim["sim_dt"]
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("control_dt must be an integer multiple of sim_dt")
        mratio = sim["measurement_dt"] / sim["control_dt"]
        if abs(mratio - round(mratio)) > 1e-9 or round(mratio) < 1:
            raise ConfigError(
                "measurement_dt must be an integer multiple of control_dt")
        if self.raw["team"]["n"] < 3:
            raise ConfigError("team size must be at least 3")
        if sim["duration"] <= 0.0:
            raise ConfigError("duration must be positive")
        ref = self.raw["reference"]
        if ref["type"] not in ("hover", "waypoints"):
            raise ConfigError(f"unknown reference type {ref['type']!r}")
        if ref["type"] == "waypoints" and len(ref["waypoints"]) < 2:
            raise ConfigError("waypoint reference needs at least two waypoints")
        try:
            SafetyParams(mode=self.raw["allocator"]["mode"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -- derived quantities ---------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def n(self) -> int:
        return int(self.raw["team"]["n"])

    @property
    def control_dt(self) -> float:
        return float(self.raw["simulation"]["control_dt"])

    @property
    def sim_substeps(self) -> int:
        sim = self.raw["simulation"]
        return int(round(sim["control_dt"] / sim["sim_dt"]))

    @property
    def measurement_every(self) -> int:
        sim = self.raw["simulation"]
        return int(round(sim["measurement_dt"] / sim["control_dt"]))

    @property
    def steps(self) -> int:
        sim = self.raw["simulation"]
        return int(round(sim["duration"] / sim["control_dt"]))

    def attach_points(self) -> np.ndarray:
        team = self.raw["team"]
        if team["attach_points"] is not None:
            pts = np.asarray(team["attach_points"], dtype=float)
            if pts.shape != (self.n, 3):
                raise ConfigError("attach_points must be n x 3")
            return pts
        angles = 2.0 * np.pi * np.arange(self.n) / self.n
        r = float(team["attach_radius"])
        return np.column_stack([r * np.cos(angles), r * np.sin(angles),
                                np.zeros(self.n)])

    def system_params(self) -> SystemParams:
        payload = BodyParams(self.raw["payload"]["mass"],
                             np.asarray(self.raw["payload"]["inertia"]))
        quad = BodyParams(self.raw["quadrotor"]["mass"],
                          np.asarray(self.raw["quadrotor"]["inertia"]),
                          self.raw["quadrotor"]["motor_constant"])
        cable = self.raw["cable"]
        cables = [CableParams(cable["length"], cable["stiffness"],
                              cable["damping"], rho)
                  for rho in self.attach_points()]
        return SystemParams(payload, quad, cables)

    def noise_config(self) -> NoiseConfig:
        noise = self.raw["noise"]
        if not noise["enabled"]:
            return NoiseConfig.zero()
        return NoiseConfig(
            pos=noise["pos"], vel=noise["vel"], euler=noise["euler"],
            omega=noise["omega"], cable_dir=noise["cable_dir"],
            cable_rate=noise["cable_rate"], payload_pos=noise["payload_pos"],
            payload_vel=noise["payload_vel"], payload_rot=noise["payload_rot"],
            payload_omega=noise["payload_omega"])

    def payload_controller(self) -> PayloadController:
        pc = self.raw["payload_controller"]
        gains = PayloadGains(kp=pc["kp"], kd=pc["kd"], ki=pc["ki"],
                             kr=pc["kr"], komega=pc["komega"],
                             integral_clamp=pc["integral_clamp"])
        return PayloadController(gains, self.raw["payload"]["mass"],
                                 np.asarray(self.raw["payload"]["inertia"]))

    def robot_controllers(self) -> list[RobotController]:
        rc = self.raw["robot_controller"]
        gains = CableGains(kq=rc["kq"], komega=rc["komega"], kr=rc["kr"],
                           komega_att=rc["komega_att"])
        quad = self.raw["quadrotor"]
        return [
            RobotController(gains, quad["mass"], np.asarray(quad["inertia"]),
                            self.raw["cable"]["length"], quad["max_thrust"],
                            rc["qdot_cutoff_hz"])
            for _ in range(self.n)
        ]

    def safety_params(self) -> SafetyParams:
        al = self.raw["allocator"]
        return SafetyParams(mode=al["mode"], gain=al["gain"], decay=al["decay"],
                            human_radius=al["human_radius"],
                            robot_radius=al["robot_radius"],
                            max_iterations=al["max_iterations"],
                            tolerance=al["tolerance"],
                            penalty_growth=al["penalty_growth"],
                            max_tension=al["max_tension"])

    def allocator(self) -> SafetyAllocator:
        return SafetyAllocator(self.safety_params())

    def ukf_noise(self) -> UkfNoise:
        u = self.raw["ukf"]
        noise = self.raw["noise"]
        return UkfNoise(
            thrust=u["sigma_thrust"], tension=u["sigma_tension"],
            cable_dir=u["sigma_cable_dir"], moment=u["sigma_moment"],
            omega=u["sigma_omega"], cable_rate=u["sigma_cable_rate"],
            meas_pos=max(noise["pos"], 1e-6),
            meas_vel=max(noise["vel"], 1e-5),
            meas_euler=max(noise["euler"], 1e-6),
            meas_omega=max(noise["omega"], 1e-5),
            meas_cable_dir=max(noise["cable_dir"], 1e-6),
            meas_cable_rate=max(noise["cable_rate"], 1e-5))

    def tension_ukf(self) -> TensionUkf:
        u = self.raw["ukf"]
        quad = self.raw["quadrotor"]
        return TensionUkf(quad["mass"], np.asarray(quad["inertia"]),
                          self.raw["cable"]["length"], self.ukf_noise(),
                          alpha=u["alpha"], beta=u["beta"], kappa=u["kappa"])

    def admittance_gains(self) -> AdmittanceGains:
        adm = self.raw["admittance"]
        return AdmittanceGains(np.asarray(adm["mass"], dtype=float),
                               np.asarray(adm["damping"], dtype=float),
                               np.asarray(adm["stiffness"], dtype=float))

    def admittance_controller(self) -> AdmittanceController:
        return AdmittanceController(self.admittance_gains(), self.control_dt)

    def wrench_estimator(self) -> WrenchEstimator:
        adm = self.raw["admittance"]
        return WrenchEstimator(self.raw["payload"]["mass"], self.control_dt,
                               lowpass_hz=adm["wrench_lowpass_hz"])


def load_config(path: str | Path | None = None,
                override: dict | None = None) -> ScenarioConfig:
    cfg = ScenarioConfig.from_file(path) if path else ScenarioConfig.from_dict()
    if override:
        cfg = cfg.override(override)
    return cfg
