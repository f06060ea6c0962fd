"""Reference trajectories and scripted inputs for closed-loop runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FlatReference:
    """Payload trajectory sample in flat coordinates [pos, (roll,pitch,yaw)]."""

    pos: np.ndarray      # (3,)
    vel: np.ndarray
    acc: np.ndarray
    euler_rpy: np.ndarray  # (3,) roll, pitch, yaw
    euler_rate: np.ndarray


class HoverReference:
    def __init__(self, position, yaw: float = 0.0):
        self._pos = np.asarray(position, dtype=float)
        self._rpy = np.array([0.0, 0.0, float(yaw)])

    def at(self, t: float) -> FlatReference:
        return FlatReference(self._pos.copy(), np.zeros(3), np.zeros(3),
                             self._rpy.copy(), np.zeros(3))


def _min_jerk(tau: np.ndarray | float):
    """Quintic 0->1 profile with zero boundary velocity and acceleration."""
    tau = np.clip(tau, 0.0, 1.0)
    s = 10 * tau ** 3 - 15 * tau ** 4 + 6 * tau ** 5
    ds = 30 * tau ** 2 - 60 * tau ** 3 + 30 * tau ** 4
    dds = 60 * tau - 180 * tau ** 2 + 120 * tau ** 3
    return s, ds, dds


class WaypointReference:
    """Min-jerk interpolation through timed position waypoints, fixed yaw."""

    def __init__(self, waypoints: list[tuple[float, np.ndarray]], yaw: float = 0.0):
        if len(waypoints) < 2:
            raise ValueError("need at least two waypoints")
        self._times = np.array([float(t) for t, _ in waypoints])
        if np.any(np.diff(self._times) <= 0.0):
            raise ValueError("waypoint times must be strictly increasing")
        self._points = np.stack([np.asarray(p, dtype=float) for _, p in waypoints])
        self._rpy = np.array([0.0, 0.0, float(yaw)])

    def at(self, t: float) -> FlatReference:
        times, pts = self._times, self._points
        if t <= times[0]:
            return FlatReference(pts[0].copy(), np.zeros(3), np.zeros(3),
                                 self._rpy.copy(), np.zeros(3))
        if t >= times[-1]:
            return FlatReference(pts[-1].copy(), np.zeros(3), np.zeros(3),
                                 self._rpy.copy(), np.zeros(3))
        i = int(np.searchsorted(times, t, side="right")) - 1
        t0, t1 = times[i], times[i + 1]
        span = t1 - t0
        s, ds, dds = _min_jerk((t - t0) / span)
        delta = pts[i + 1] - pts[i]
        return FlatReference(pts[i] + s * delta, (ds / span) * delta,
                             (dds / span ** 2) * delta,
                             self._rpy.copy(), np.zeros(3))


def reference_from_config(ref_cfg: dict):
    if ref_cfg["type"] == "hover":
        return HoverReference(ref_cfg["position"], ref_cfg["yaw"])
    waypoints = [(float(w["time"]), np.asarray(w["position"], dtype=float))
                 for w in ref_cfg["waypoints"]]
    return WaypointReference(waypoints, ref_cfg["yaw"])


@dataclass
class WrenchEvent:
    time: float
    duration: float
    force: np.ndarray
    moment: np.ndarray
    ramp: float = 0.0   # linear on/off ramp length, s

    def value_at(self, t: float) -> np.ndarray:
        """Wrench contribution at time t (zero outside the active window)."""
        rel = t - self.time
        if rel < 0.0 or rel > self.duration:
            return np.zeros(6)
        scale = 1.0
        if self.ramp > 0.0:
            scale = min(1.0, rel / self.ramp,
                        max(0.0, (self.duration - rel) / self.ramp))
        return scale * np.concatenate([self.force, self.moment])


class WrenchScript:
    def __init__(self, events: list[WrenchEvent]):
        self.events = events

    @classmethod
    def from_config(cls, entries: list[dict]) -> "WrenchScript":
        events = [
            WrenchEvent(float(e["time"]), float(e["duration"]),
                        np.asarray(e.get("force", [0, 0, 0]), dtype=float),
                        np.asarray(e.get("moment", [0, 0, 0]), dtype=float),
                        float(e.get("ramp", 0.0)))
            for e in entries
        ]
        return cls(events)

    def wrench_at(self, t: float) -> np.ndarray:
        total = np.zeros(6)
        for e in self.events:
            total += e.value_at(t)
        return total


class HumanPath:
    """Piecewise-linear human position over time; None when absent."""

    def __init__(self, times: np.ndarray, points: np.ndarray):
        self._times = times
        self._points = points

    @classmethod
    def from_config(cls, entry: dict | None) -> "HumanPath | None":
        if entry is None:
            return None
        if "waypoints" in entry and entry["waypoints"]:
            times = np.array([float(w["time"]) for w in entry["waypoints"]])
            pts = np.stack([np.asarray(w["position"], dtype=float)
                            for w in entry["waypoints"]])
            return cls(times, pts)
        start = np.asarray(entry["start"], dtype=float)
        end = np.asarray(entry["end"], dtype=float)
        t0 = float(entry.get("start_time", 0.0))
        speed = float(entry.get("speed", 0.25))
        walk = np.linalg.norm(end - start) / max(speed, 1e-9)
        return cls(np.array([t0, t0 + walk]), np.stack([start, end]))

    def at(self, t: float) -> np.ndarray:
        times, pts = self._times, self._points
        if t <= times[0]:
            return pts[0].copy()
        if t >= times[-1]:
            return pts[-1].copy()
        i = int(np.searchsorted(times, t, side="right")) - 1
        frac = (t - times[i]) / (times[i + 1] - times[i])
        return pts[i] + frac * (pts[i + 1] - pts[i])
