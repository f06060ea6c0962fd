"""Canned scenario configurations shared by the CLI and the acceptance suite."""
from __future__ import annotations

import numpy as np

from .config import ScenarioConfig


def hover(duration: float = 10.0, seed: int = 0, noise: bool = True) -> ScenarioConfig:
    return ScenarioConfig.from_dict({
        "simulation": {"duration": duration},
        "noise": {"enabled": noise},
        "seed": seed,
    })


def impedance_x(damping: float, duration: float, seed: int = 0,
                force: float = 0.5) -> ScenarioConfig:
    """Step force along x against the virtual mass-damper (no stiffness)."""
    return ScenarioConfig.from_dict({
        "simulation": {"duration": duration},
        "seed": seed,
        "admittance": {"damping": [damping] * 3 + [5.0] * 3,
                        "mass": [0.25] * 3 + [0.1] * 3,
                        "stiffness": [0.0] * 6},
        "script": {"wrenches": [
            {"time": 0.0, "duration": duration, "force": [force, 0.0, 0.0]}]},
    })


def impedance_yaw(damping: float, duration: float, seed: int = 0,
                  moment: float = 0.05) -> ScenarioConfig:
    """Step yaw moment against the rotational virtual mass-damper."""
    return ScenarioConfig.from_dict({
        "simulation": {"duration": duration},
        "seed": seed,
        "admittance": {"damping": [1.25] * 3 + [5.0, 5.0, damping],
                        "mass": [0.25] * 3 + [0.1] * 3,
                        "stiffness": [0.0] * 6},
        "script": {"wrenches": [
            {"time": 0.0, "duration": duration, "moment": [0.0, 0.0, moment]}]},
    })


def wrench_evaluation(seed: int = 3) -> ScenarioConfig:
    """Quasi-static ramped pulls on every axis of the wrench, in sequence."""
    events = []
    t = 2.0
    for kind, vec in (("force", [0.5, 0, 0]), ("force", [0, 0.5, 0]),
                      ("force", [0, 0, -0.4]), ("moment", [0.04, 0, 0]),
                      ("moment", [0, 0.04, 0]), ("moment", [0, 0, 0.05])):
        events.append({"time": t, "duration": 3.5, "ramp": 1.2, kind: vec})
        t += 4.5
    return ScenarioConfig.from_dict({
        "simulation": {"duration": t + 1.0},
        "seed": seed,
        "script": {"wrenches": events},
    })


def human_approach(mode: str, duration: float = 16.0, seed: int = 0,
                   stop_clearance: float = 0.5) -> ScenarioConfig:
    """Human walks from 3 m toward the hovering team and stops near the
    footprint; a scripted pull runs concurrently so tracking is exercised."""
    # default triangle footprint: attach circle radius 0.5, so the boundary
    # sits 0.5 m from the team center
    stop_x = 0.5 + stop_clearance
    return ScenarioConfig.from_dict({
        "simulation": {"duration": duration},
        "seed": seed,
        "allocator": {"mode": mode, "gain": 0.05, "decay": 3.0,
                       "human_radius": 1.0, "robot_radius": 0.75},
        "script": {
            "human": {"start": [3.0, 0.0, 1.7], "end": [stop_x, 0.0, 1.7],
                       "speed": 0.25, "start_time": 1.0},
            "wrenches": [{"time": 6.0, "duration": 4.0, "ramp": 0.8,
                           "force": [0.0, 0.25, 0.0]}],
        },
    })


def trajectory_correction(seed: int = 1) -> ScenarioConfig:
    """Straight traverse; a mid-course pull deflects the payload and the
    translational stiffness pulls the corrected path back after release."""
    return ScenarioConfig.from_dict({
        "simulation": {"duration": 20.0},
        "seed": seed,
        "admittance": {"damping": [5.0] * 6,
                        "stiffness": [1.2, 1.2, 1.2, 0.0, 0.0, 0.0]},
        "reference": {"type": "waypoints", "waypoints": [
            {"time": 0.0, "position": [0.0, 0.0, 1.0]},
            {"time": 18.0, "position": [1.5, 0.0, 1.0]}]},
        "script": {"wrenches": [
            {"time": 3.0, "duration": 8.0, "ramp": 0.3,
             "force": [0.0, 0.4, 0.0]}]},
    })


def interactive(seed: int = 0, duration: float = 3600.0) -> ScenarioConfig:
    """Long-running hover session for the operator console."""
    return ScenarioConfig.from_dict({
        "simulation": {"duration": duration},
        "seed": seed,
        "allocator": {"mode": "optimization"},
        "script": {"human": {"start": [2.5, 0.0, 1.7], "end": [2.5, 0.0, 1.7],
                              "speed": 0.25, "start_time": 0.0}},
    })


PRESETS = {
    "hover": hover,
    "wrench-eval": wrench_evaluation,
    "correction": trajectory_correction,
    "interactive": interactive,
}
