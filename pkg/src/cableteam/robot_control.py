"""Per-robot controller tracking a desired cable tension vector.

Layered like the rest of the stack: the desired tension fixes a desired cable
direction, a geometric cable-direction law produces the robot force vector
(split into components along and across the cable), and an SO(3) attitude
loop converts that force into a thrust scalar and body moment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocation import DegenerateTension
from .sim import GRAVITY, E3
from .so3 import cross3, hat, vee


@dataclass
class CableGains:
    """Diagonal gains: cable direction/rate loop and attitude loop."""

    kq: np.ndarray
    komega: np.ndarray
    kr: np.ndarray
    komega_att: np.ndarray

    def __post_init__(self):
        for name in ("kq", "komega", "kr", "komega_att"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim == 0:
                v = np.full(3, float(v))
            if np.any(v < 0.0):
                raise ValueError("gains must be nonnegative")
            setattr(self, name, v)


@dataclass
class RobotCommand:
    thrust: float
    moment: np.ndarray
    saturated: bool = False
    degenerate: bool = False


class RobotController:
    """One instance per robot; holds the desired-direction differentiator."""

    def __init__(self, gains: CableGains, mass: float, inertia: np.ndarray,
                 cable_length: float, max_thrust: float = 8.0,
                 qdot_cutoff_hz: float = 20.0):
        self.gains = gains
        self.mass = float(mass)
        self.inertia = np.asarray(inertia, dtype=float)
        if self.inertia.ndim == 1:
            self.inertia = np.diag(self.inertia)
        self.cable_length = float(cable_length)
        self.max_thrust = float(max_thrust)
        self._tau = 1.0 / (2.0 * np.pi * qdot_cutoff_hz)
        self._q_des_prev: np.ndarray | None = None
        self._qdot_des = np.zeros(3)

    def reset(self) -> None:
        self._q_des_prev = None
        self._qdot_des = np.zeros(3)

    def desired_cable(self, mu_des: np.ndarray, dt: float):
        """Desired cable direction, angular velocity and direction rate.

        q_des = -mu/||mu||; the rate comes from low-pass differentiation of
        q_des across control steps so a constant tension yields zero rate.
        """
        mu_des = np.asarray(mu_des, dtype=float)
        norm = float(np.linalg.norm(mu_des))
        if norm <= 1e-6:
            raise DegenerateTension("desired tension too small for a direction")
        q_des = -mu_des / norm
        if self._q_des_prev is None:
            self._qdot_des = np.zeros(3)
        else:
            raw = (q_des - self._q_des_prev) / dt
            alpha = dt / (self._tau + dt)
            self._qdot_des = self._qdot_des + alpha * (raw - self._qdot_des)
        self._q_des_prev = q_des
        omega_des = cross3(q_des, self._qdot_des)
        return q_des, omega_des, self._qdot_des.copy()

    def cable_force(self, q, qdot, q_des, omega_des, qdot_des, mu_des,
                    accel_att) -> np.ndarray:
        """Force vector for the robot from cable direction errors.

        ``accel_att`` is the commanded attach-point acceleration including the
        gravity term (a_L,c propagated to the attach point).
        """
        par, perp = self.cable_force_parts(q, qdot, q_des, omega_des,
                                           qdot_des, mu_des, accel_att)
        return par + perp

    def cable_force_parts(self, q, qdot, q_des, omega_des, qdot_des, mu_des,
                          accel_att):
        q = np.asarray(q, dtype=float)
        q = q / np.linalg.norm(q)
        qdot = np.asarray(qdot, dtype=float)
        m, length = self.mass, self.cable_length
        omega = cross3(q, qdot)

        e_q = cross3(q_des, q)
        e_om = omega + cross3(q, cross3(q, omega_des))

        def qhat2(x):
            return q * (q @ x) - x

        bracket = (-self.gains.kq * e_q - self.gains.komega * e_om
                   - qhat2(omega_des) - (q @ omega_des) * qdot_des)
        perp = m * length * cross3(q, bracket) - m * qhat2(accel_att)
        par = (q * (q @ mu_des) + m * length * (omega @ omega) * q
               + m * q * (q @ accel_att))
        return par, perp

    def attitude_thrust(self, force, rot, omega, yaw_des: float,
                        yaw_rate_des: float) -> RobotCommand:
        """Thrust projection and geometric attitude moment for a force vector.

        A vanishing force commands the hover fallback (weight along world z)
        and flags the output as degenerate.
        """
        force = np.asarray(force, dtype=float)
        degenerate = False
        if np.linalg.norm(force) <= 1e-6:
            force = self.mass * GRAVITY * E3
            degenerate = True

        thrust = float(force @ (rot @ E3))
        saturated = not (0.0 <= thrust <= self.max_thrust)
        thrust = float(np.clip(thrust, 0.0, self.max_thrust))

        z_b = force / np.linalg.norm(force)
        x_c = np.array([np.cos(yaw_des), np.sin(yaw_des), 0.0])
        y_b = cross3(z_b, x_c)
        ny = np.linalg.norm(y_b)
        if ny < 1e-6:
            # thrust nearly along the heading direction; use the yaw
            # left-vector to stay well conditioned
            y_b = cross3(z_b, np.array([-np.sin(yaw_des), np.cos(yaw_des), 0.0]))
            ny = np.linalg.norm(y_b)
        y_b /= ny
        x_b = cross3(y_b, z_b)
        rot_des = np.column_stack([x_b, y_b, z_b])

        omega_des = np.array([0.0, 0.0, yaw_rate_des * z_b[2]])
        m_rel = rot.T @ rot_des
        e_r = 0.5 * vee(m_rel - m_rel.T, tol=np.inf)
        omega_ref = m_rel @ omega_des
        e_om = omega_ref - omega
        j = self.inertia
        moment = (self.gains.kr * e_r + self.gains.komega_att * e_om
                  + cross3(omega, j @ omega)
                  - j @ (hat(omega) @ omega_ref))
        return RobotCommand(thrust, moment, saturated, degenerate)

    def command(self, mu_des, q, qdot, rot, omega, accel_att, dt,
                yaw_des: float = 0.0, yaw_rate_des: float = 0.0) -> RobotCommand:
        """Full pipeline from desired tension to (thrust, moment)."""
        try:
            q_des, omega_des, qdot_des = self.desired_cable(mu_des, dt)
        except DegenerateTension:
            cmd = self.attitude_thrust(np.zeros(3), rot, omega,
                                       yaw_des, yaw_rate_des)
            cmd.degenerate = True
            return cmd
        force = self.cable_force(q, qdot, q_des, omega_des, qdot_des,
                                 mu_des, accel_att)
        return self.attitude_thrust(force, rot, omega, yaw_des, yaw_rate_des)
