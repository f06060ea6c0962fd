"""Payload external-wrench estimation and the 6-DoF admittance law.

The estimator inverts the quasi-static payload force balance: with the cable
tension vectors known, whatever wrench is unaccounted for after gravity must
come from outside (the human operator). The admittance controller renders a
virtual mass-spring-damper per axis and shifts the desired trajectory by its
offset. Axis order throughout this module is
[x, y, z, roll, pitch, yaw]; forces in the world frame, moments in the
payload frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import GRAVITY
from .so3 import wrap_angle

ROTATIONAL = slice(3, 6)


class StaleTension(RuntimeError):
    """Tension estimates too old to fuse."""


@dataclass
class AdmittanceGains:
    """Virtual mass, damping, stiffness; diagonal per-axis values."""

    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray

    def __post_init__(self):
        for name in ("mass", "damping", "stiffness"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim == 0:
                v = np.full(6, float(v))
            setattr(self, name, v)
        if np.any(self.mass <= 0.0):
            raise ValueError("virtual mass must be positive")
        if np.any(self.damping < 0.0) or np.any(self.stiffness < 0.0):
            raise ValueError("damping and stiffness must be nonnegative")


@dataclass
class AdmittanceState:
    offset: np.ndarray
    rate: np.ndarray

    @classmethod
    def zero(cls) -> "AdmittanceState":
        return cls(np.zeros(6), np.zeros(6))


class TensionMailbox:
    """Latest-value, per-robot tension storage with timestamps.

    Producers overwrite their slot; the consumer reads a snapshot without
    blocking. Writes of a (timestamp, vector) pair swap in a fresh tuple so a
    torn read can never mix old and new values.
    """

    def __init__(self, n: int):
        self._slots: list[tuple[float, np.ndarray] | None] = [None] * n

    def put(self, robot: int, timestamp: float, tension: np.ndarray) -> None:
        self._slots[robot] = (timestamp, np.asarray(tension, dtype=float))

    def snapshot(self) -> tuple[np.ndarray, np.ndarray]:
        if any(s is None for s in self._slots):
            raise StaleTension("missing tension estimates")
        stamps = np.array([s[0] for s in self._slots])
        tensions = np.stack([s[1] for s in self._slots])
        return stamps, tensions


def payload_wrench_from_tensions(mu: np.ndarray, p: np.ndarray,
                                 payload_mass: float) -> np.ndarray:
    """Quasi-static wrench inversion: [F; M] = -P mu + [m g e3; 0].

    ``mu`` stacks the payload-side cable tension vectors (3n,).
    """
    wrench = -(p @ np.asarray(mu, dtype=float))
    wrench[2] += payload_mass * GRAVITY
    return wrench


class WrenchEstimator:
    """Fuses per-robot tension estimates into the payload external wrench.

    Estimates older than ``stale_limit`` control periods freeze the output
    and raise the stale flag. An optional first-order low-pass suppresses
    estimator noise before the admittance law.
    """

    def __init__(self, payload_mass: float, control_dt: float,
                 lowpass_hz: float = 10.0, stale_limit: int = 3):
        self.payload_mass = float(payload_mass)
        self.control_dt = float(control_dt)
        self.stale_limit = int(stale_limit)
        if lowpass_hz and lowpass_hz > 0.0:
            tau = 1.0 / (2.0 * np.pi * lowpass_hz)
            self._alpha = self.control_dt / (tau + self.control_dt)
        else:
            self._alpha = 1.0
        self._filtered = np.zeros(6)
        self._raw = np.zeros(6)
        self._have_output = False

    def reset(self) -> None:
        self._filtered[:] = 0.0
        self._raw[:] = 0.0
        self._have_output = False

    def step(self, mailbox: TensionMailbox, p: np.ndarray,
             now: float) -> tuple[np.ndarray, np.ndarray, bool]:
        """Returns (filtered wrench, raw wrench, stale flag)."""
        try:
            stamps, tensions = mailbox.snapshot()
            stale = bool(np.any(now - stamps > self.stale_limit * self.control_dt
                                + 1e-12))
        except StaleTension:
            stale = True
        if stale:
            if not self._have_output:
                raise StaleTension("no usable tension estimates yet")
            return self._filtered.copy(), self._raw.copy(), True

        self._raw = payload_wrench_from_tensions(tensions.ravel(), p,
                                                 self.payload_mass)
        if self._have_output:
            self._filtered = self._filtered + self._alpha * (self._raw - self._filtered)
        else:
            self._filtered = self._raw.copy()
            self._have_output = True
        return self._filtered.copy(), self._raw.copy(), False


class AdmittanceController:
    """Virtual mass-spring-damper, integrated per axis with RK4.

    The wrench is held constant across each step (zero-order hold); outputs
    are the shifted desired trajectory with rotational components wrapped.
    """

    def __init__(self, gains: AdmittanceGains, dt: float):
        if not 0.0 < dt <= 0.05:
            raise ValueError("dt must lie in (0, 0.05]")
        self.gains = gains
        self.dt = float(dt)

    def set_gains(self, gains: AdmittanceGains) -> None:
        self.gains = gains

    def _deriv(self, offset, rate, wrench):
        g = self.gains
        acc = (wrench - g.damping * rate - g.stiffness * offset) / g.mass
        return rate, acc

    def step(self, state: AdmittanceState, wrench: np.ndarray,
             ref_pos: np.ndarray, ref_vel: np.ndarray, ref_acc: np.ndarray):
        """One control period; returns (pos_des, vel_des, acc_des, new state)."""
        wrench = np.asarray(wrench, dtype=float)
        dt = self.dt
        e, r = state.offset, state.rate
        k1e, k1r = self._deriv(e, r, wrench)
        k2e, k2r = self._deriv(e + 0.5 * dt * k1e, r + 0.5 * dt * k1r, wrench)
        k3e, k3r = self._deriv(e + 0.5 * dt * k2e, r + 0.5 * dt * k2r, wrench)
        k4e, k4r = self._deriv(e + dt * k3e, r + dt * k3r, wrench)
        e_new = e + (dt / 6.0) * (k1e + 2 * k2e + 2 * k3e + k4e)
        r_new = r + (dt / 6.0) * (k1r + 2 * k2r + 2 * k3r + k4r)
        new_state = AdmittanceState(e_new, r_new)

        pos = ref_pos + e_new
        pos = pos.copy()
        pos[ROTATIONAL] = wrap_angle(pos[ROTATIONAL])
        vel = ref_vel + r_new
        _, acc = self._deriv(e_new, r_new, wrench)
        return pos, vel, ref_acc + acc, new_state


def dominant_decay_rate(gains: AdmittanceGains) -> np.ndarray:
    """Slowest decay rate per axis of the homogeneous system (1/s).

    For K = 0 the offset itself never decays (rate 0, offset retained after
    release); the velocity then decays at D/M instead.
    """
    m, d, k = gains.mass, gains.damping, gains.stiffness
    disc = d * d - 4.0 * m * k
    rates = np.empty(6)
    for i in range(6):
        if k[i] == 0.0:
            rates[i] = 0.0
        elif disc[i] >= 0.0:
            rates[i] = (d[i] - np.sqrt(disc[i])) / (2.0 * m[i])
        else:
            rates[i] = d[i] / (2.0 * m[i])
    return rates
