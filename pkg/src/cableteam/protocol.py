"""Wire schema for the interaction service: versioned JSON text messages.

The same schema is the operator-console contract; field names and units are
part of the public interface. Forces are Newtons in the world frame, moments
Newton-meters in the payload frame, positions meters, angles radians.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .runner import Frame

SCHEMA_VERSION = 1
MAX_FORCE = 20.0     # N, magnitude bound for injected wrenches
MAX_MOMENT = 2.0     # N m
MAX_DURATION = 30.0  # s
COMMAND_TYPES = ("apply_wrench", "set_human", "set_admittance_gains",
                 "set_safety_mode", "reset")


class MalformedMessage(ValueError):
    """Message cannot be parsed or fails validation."""


class SchemaVersionMismatch(MalformedMessage):
    """Message carries an unsupported schema version."""


@dataclass
class Command:
    kind: str
    seq: int = 0
    force: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    moment: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    duration: float = 0.0
    position: list | None = None
    mass: list | None = None
    damping: list | None = None
    stiffness: list | None = None
    mode: str | None = None
    human_radius: float | None = None
    robot_radius: float | None = None
    seed: int | None = None


def _floats(value, length, name) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise MalformedMessage(f"{name} must be a list of {length} numbers")
    out = []
    for v in value:
        if not isinstance(v, (int, float)) or isinstance(v, bool) \
                or not math.isfinite(v):
            raise MalformedMessage(f"{name} must contain finite numbers")
        out.append(float(v))
    return out


def decode_command(text: str | bytes) -> Command:
    """Parse and validate one client command; never raises anything except
    MalformedMessage (and its SchemaVersionMismatch subtype)."""
    try:
        data = json.loads(text)
    except Exception as exc:
        raise MalformedMessage(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise MalformedMessage("message must be a JSON object")
    if data.get("v") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"unsupported schema version {data.get('v')!r}")
    kind = data.get("type")
    if kind not in COMMAND_TYPES:
        raise MalformedMessage(f"unknown command type {kind!r}")
    seq = data.get("seq", 0)
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise MalformedMessage("seq must be an integer")
    cmd = Command(kind=kind, seq=seq)

    if kind == "apply_wrench":
        cmd.force = _floats(data.get("force", [0, 0, 0]), 3, "force")
        cmd.moment = _floats(data.get("moment", [0, 0, 0]), 3, "moment")
        duration = data.get("duration", 0.0)
        if not isinstance(duration, (int, float)) or isinstance(duration, bool) \
                or not 0.0 < float(duration) <= MAX_DURATION:
            raise MalformedMessage(
                f"duration must lie in (0, {MAX_DURATION}] seconds")
        cmd.duration = float(duration)
        if float(np.linalg.norm(cmd.force)) > MAX_FORCE:
            raise MalformedMessage(f"force magnitude exceeds {MAX_FORCE} N")
        if float(np.linalg.norm(cmd.moment)) > MAX_MOMENT:
            raise MalformedMessage(f"moment magnitude exceeds {MAX_MOMENT} N m")
    elif kind == "set_human":
        cmd.position = _floats(data.get("position"), 3, "position")
    elif kind == "set_admittance_gains":
        cmd.mass = _floats(data.get("mass"), 6, "mass")
        cmd.damping = _floats(data.get("damping"), 6, "damping")
        cmd.stiffness = _floats(data.get("stiffness"), 6, "stiffness")
        if any(v <= 0.0 for v in cmd.mass):
            raise MalformedMessage("mass entries must be positive")
        if any(v < 0.0 for v in cmd.damping + cmd.stiffness):
            raise MalformedMessage("damping and stiffness must be nonnegative")
    elif kind == "set_safety_mode":
        mode = data.get("mode")
        if mode not in ("off", "gradient", "optimization"):
            raise MalformedMessage(f"unknown safety mode {mode!r}")
        cmd.mode = mode
        for key in ("human_radius", "robot_radius"):
            if key in data and data[key] is not None:
                v = data[key]
                if not isinstance(v, (int, float)) or isinstance(v, bool) \
                        or not 0.0 < float(v) <= 10.0:
                    raise MalformedMessage(f"{key} must lie in (0, 10] m")
                setattr(cmd, key, float(v))
    elif kind == "reset":
        seed = data.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
            raise MalformedMessage("seed must be an integer")
        cmd.seed = seed
    return cmd


def encode_command(cmd: Command) -> str:
    data: dict = {"v": SCHEMA_VERSION, "type": cmd.kind, "seq": cmd.seq}
    if cmd.kind == "apply_wrench":
        data.update(force=cmd.force, moment=cmd.moment, duration=cmd.duration)
    elif cmd.kind == "set_human":
        data.update(position=cmd.position)
    elif cmd.kind == "set_admittance_gains":
        data.update(mass=cmd.mass, damping=cmd.damping, stiffness=cmd.stiffness)
    elif cmd.kind == "set_safety_mode":
        data.update(mode=cmd.mode, human_radius=cmd.human_radius,
                    robot_radius=cmd.robot_radius)
    elif cmd.kind == "reset":
        data.update(seed=cmd.seed)
    return json.dumps(data, sort_keys=True)


def encode_frame(frame: Frame, seq: int) -> str:
    data = {
        "v": SCHEMA_VERSION,
        "type": "frame",
        "seq": seq,
        "t": frame.t,
        "payload": {
            "pos": frame.payload_pos.tolist(),
            "euler": frame.payload_euler.tolist(),
            "vel": frame.payload_vel.tolist(),
            "omega": frame.payload_omega.tolist(),
        },
        "robots": [
            {
                "pos": frame.quad_pos[k].tolist(),
                "cable_taut": bool(frame.cable_taut[k]),
                "cable_dir": frame.cable_dirs[k].tolist(),
                "tension": float(frame.tension_est[k]),
            }
            for k in range(frame.quad_pos.shape[0])
        ],
        "est_wrench": frame.est_wrench.tolist(),
        "applied_wrench": frame.applied_wrench.tolist(),
        "des_pos": frame.des_pos.tolist(),
        "des_euler": frame.des_euler.tolist(),
        "ref_pos": frame.ref_pos.tolist(),
        "human": None if frame.human_pos is None else frame.human_pos.tolist(),
        "min_human_dist": None if not np.isfinite(frame.min_human_dist)
        else frame.min_human_dist,
        "min_robot_dist": frame.min_robot_dist,
        "safety": {
            "mode": frame.safety_mode,
            "human_radius": frame.human_radius,
            "robot_radius": frame.robot_radius,
        },
    }
    return json.dumps(data, sort_keys=True)


def decode_frame(text: str | bytes) -> dict:
    """Parse a frame message (used by tests and the replay tool)."""
    try:
        data = json.loads(text)
    except Exception as exc:
        raise MalformedMessage(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise MalformedMessage("message must be a JSON object")
    if data.get("v") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"unsupported schema version {data.get('v')!r}")
    if data.get("type") != "frame":
        raise MalformedMessage("not a frame message")
    return data


def encode_hello(n: int, control_dt: float, frame_hz: float) -> str:
    return json.dumps({
        "v": SCHEMA_VERSION, "type": "hello", "n": n,
        "control_dt": control_dt, "frame_hz": frame_hz,
        "bounds": {"max_force": MAX_FORCE, "max_moment": MAX_MOMENT,
                   "max_duration": MAX_DURATION},
    }, sort_keys=True)


def encode_ack(command: str, seq: int) -> str:
    return json.dumps({"v": SCHEMA_VERSION, "type": "ack",
                       "command": command, "seq": seq}, sort_keys=True)


def encode_error(message: str) -> str:
    return json.dumps({"v": SCHEMA_VERSION, "type": "error",
                       "message": message}, sort_keys=True)
