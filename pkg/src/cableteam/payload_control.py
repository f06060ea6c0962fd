"""Payload pose controller: desired force/moment from pose and twist errors.

The force command is expressed in the world frame, the moment command in the
payload frame. Errors point from the current state toward the reference, so
positive gains stabilize.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sim import GRAVITY, PayloadOdometry
from .so3 import cross3, vee


@dataclass
class PayloadGains:
    """Diagonal gains; integral_clamp bounds the integral force term in N."""

    kp: np.ndarray
    kd: np.ndarray
    ki: np.ndarray
    kr: np.ndarray
    komega: np.ndarray
    integral_clamp: np.ndarray

    def __post_init__(self):
        for name in ("kp", "kd", "ki", "kr", "komega", "integral_clamp"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim == 0:
                v = np.full(3, float(v))
            setattr(self, name, v)
        if np.any(self.kp < 0) or np.any(self.kd < 0) or np.any(self.ki < 0) \
                or np.any(self.kr < 0) or np.any(self.komega < 0):
            raise ValueError("gains must be nonnegative")
        if np.any(self.integral_clamp <= 0):
            raise ValueError("integral clamp must be positive")


@dataclass
class PayloadReference:
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    rot: np.ndarray
    omega: np.ndarray
    omega_dot: np.ndarray

    @classmethod
    def hover(cls, pos, rot=None) -> "PayloadReference":
        return cls(np.asarray(pos, dtype=float), np.zeros(3), np.zeros(3),
                   np.eye(3) if rot is None else rot, np.zeros(3), np.zeros(3))


@dataclass
class PayloadCommand:
    force: np.ndarray      # world frame, N
    moment: np.ndarray     # payload frame, N m
    accel_cmd: np.ndarray  # commanded linear acceleration incl. gravity term
    alpha_cmd: np.ndarray  # angular acceleration implied by the moment command


def attitude_error(rot: np.ndarray, rot_des: np.ndarray) -> np.ndarray:
    """e_R = 1/2 (R^T R_des - R_des^T R)^vee, pointing toward the reference."""
    m = rot.T @ rot_des
    return 0.5 * vee(m - m.T, tol=np.inf)


class PayloadController:
    """Stateful (integral term) pose controller; one instance per loop."""

    def __init__(self, gains: PayloadGains, mass: float, inertia: np.ndarray):
        self.gains = gains
        self.mass = float(mass)
        self.inertia = np.asarray(inertia, dtype=float)
        if self.inertia.ndim == 1:
            self.inertia = np.diag(self.inertia)
        self._inertia_inv = np.linalg.inv(self.inertia)
        self._integral = np.zeros(3)

    def reset(self) -> None:
        self._integral[:] = 0.0

    def desired_wrench(self, odom: PayloadOdometry, ref: PayloadReference,
                       dt: float) -> PayloadCommand:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        g = self.gains
        e_x = ref.pos - odom.pos
        e_v = ref.vel - odom.vel

        self._integral += e_x * dt
        # anti-windup: keep the resulting force term inside +-integral_clamp
        bound = np.where(g.ki > 0.0,
                         g.integral_clamp / (self.mass * np.maximum(g.ki, 1e-12)),
                         np.inf)
        np.clip(self._integral, -bound, bound, out=self._integral)

        accel = (g.kp * e_x + g.kd * e_v + g.ki * self._integral
                 + ref.acc + GRAVITY * np.array([0.0, 0.0, 1.0]))
        force = self.mass * accel

        e_r = attitude_error(odom.rot, ref.rot)
        rt_rd = odom.rot.T @ ref.rot
        omega_ref = rt_rd @ ref.omega
        e_om = omega_ref - odom.omega
        j = self.inertia
        moment = (g.kr * e_r + g.komega * e_om
                  + j @ (rt_rd @ ref.omega_dot)
                  + cross3(omega_ref, j @ omega_ref))
        alpha_cmd = self._inertia_inv @ (
            moment - cross3(odom.omega, j @ odom.omega))
        return PayloadCommand(force, moment, accel, alpha_cmd)
