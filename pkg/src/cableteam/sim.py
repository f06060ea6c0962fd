"""Ground-truth physics for the cable-suspended payload system.

A rigid payload hangs from n quadrotor rigid bodies by unilateral
spring-damper cables (taut or slack, never pushing). Forces on the payload
are expressed in the world frame, moments in the payload frame; quadrotor
moments are in each body frame. Integration is fixed-step classical RK4 on
the flattened state with rotation matrices re-orthonormalized after every
step.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .so3 import cross3, hat, renormalize_rotations, rot_to_euler_zyx_batch

GRAVITY = 9.81
E3 = np.array([0.0, 0.0, 1.0])


class NegativeThrust(ValueError):
    """Requested total thrust below zero."""


class NumericalBlowup(RuntimeError):
    """State norm exceeded the sanity bound during integration."""


@dataclass
class BodyParams:
    """Rigid-body constants; motor_constant only meaningful for quadrotors."""

    mass: float
    inertia: np.ndarray
    motor_constant: float = 0.0

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        if self.inertia.ndim == 1:
            self.inertia = np.diag(self.inertia)
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0.0):
            raise ValueError("inertia must be symmetric positive definite")
        self.inertia_inv = np.linalg.inv(self.inertia)


@dataclass
class CableParams:
    length: float
    stiffness: float
    damping: float
    attach: np.ndarray  # attach point in the payload frame

    def __post_init__(self):
        self.attach = np.asarray(self.attach, dtype=float)
        if self.length <= 0.0 or self.stiffness <= 0.0 or self.damping < 0.0:
            raise ValueError("invalid cable parameters")


@dataclass
class SystemParams:
    payload: BodyParams
    quad: BodyParams
    cables: list[CableParams]

    def __post_init__(self):
        if len(self.cables) < 3:
            raise ValueError("need at least three cables")
        self.rhos = np.stack([c.attach for c in self.cables])
        self.lengths = np.array([c.length for c in self.cables])
        self.stiffness = np.array([c.stiffness for c in self.cables])
        self.cable_damping = np.array([c.damping for c in self.cables])

    @property
    def n(self) -> int:
        return len(self.cables)


@dataclass
class PayloadState:
    pos: np.ndarray
    vel: np.ndarray
    rot: np.ndarray
    omega: np.ndarray  # payload frame

    def copy(self) -> "PayloadState":
        return PayloadState(self.pos.copy(), self.vel.copy(),
                            self.rot.copy(), self.omega.copy())


@dataclass
class QuadrotorState:
    pos: np.ndarray
    vel: np.ndarray
    rot: np.ndarray
    omega: np.ndarray  # body frame


@dataclass
class WorldState:
    """Payload plus per-robot states stored as stacked arrays."""

    payload: PayloadState
    quad_pos: np.ndarray    # (n,3)
    quad_vel: np.ndarray    # (n,3)
    quad_rot: np.ndarray    # (n,3,3)
    quad_omega: np.ndarray  # (n,3)
    ext_wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))
    t: float = 0.0

    @property
    def n(self) -> int:
        return self.quad_pos.shape[0]

    def quad(self, k: int) -> QuadrotorState:
        return QuadrotorState(self.quad_pos[k], self.quad_vel[k],
                              self.quad_rot[k], self.quad_omega[k])

    def copy(self) -> "WorldState":
        return WorldState(self.payload.copy(), self.quad_pos.copy(),
                          self.quad_vel.copy(), self.quad_rot.copy(),
                          self.quad_omega.copy(), self.ext_wrench.copy(), self.t)


@dataclass
class Derivatives:
    payload_vel: np.ndarray
    payload_acc: np.ndarray
    payload_alpha: np.ndarray
    quad_vel: np.ndarray
    quad_acc: np.ndarray
    quad_alpha: np.ndarray


def motor_thrust(speeds: np.ndarray, motor_constant: float) -> float:
    """Total thrust from four motor speeds, f = sum k_f w^2."""
    speeds = np.asarray(speeds, dtype=float)
    if np.any(speeds < 0.0):
        raise ValueError("motor speeds must be nonnegative")
    return float(motor_constant * np.sum(speeds ** 2))


def speeds_for_thrust(thrust: float, motor_constant: float) -> np.ndarray:
    """Equal-share motor speeds producing a requested total thrust."""
    if thrust < 0.0:
        raise NegativeThrust(f"thrust {thrust} < 0")
    return np.full(4, np.sqrt(thrust / (4.0 * motor_constant)))


def cable_tension_truth(quad_pos, quad_vel, attach_pos, attach_vel,
                        cable: CableParams) -> np.ndarray:
    """Spring-damper cable force acting on the quadrotor.

    Zero when the separation is at or below the rest length; otherwise pulls
    the quadrotor toward the attach point with magnitude
    stiffness*(dist - l) + damping*(radial rate), clamped at zero so the
    cable never pushes.
    """
    d = np.asarray(quad_pos, float) - np.asarray(attach_pos, float)
    dist = float(np.linalg.norm(d))
    if dist <= cable.length:
        return np.zeros(3)
    u = d / dist
    rate = float(u @ (np.asarray(quad_vel, float) - np.asarray(attach_vel, float)))
    mag = max(0.0, cable.stiffness * (dist - cable.length) + cable.damping * rate)
    return -mag * u


def attach_points(payload: PayloadState, rhos: np.ndarray) -> np.ndarray:
    return payload.pos + rhos @ payload.rot.T


def attach_velocities(payload: PayloadState, rhos: np.ndarray) -> np.ndarray:
    return payload.vel + cross3(payload.omega, rhos) @ payload.rot.T


def _cable_state(pl_pos, pl_vel, pl_rot, pl_omega, quad_pos, quad_vel, params):
    """Batched taut/slack cable evaluation.

    Returns tension magnitudes (n,), unit axes attach->robot (n,3), attach
    positions and velocities.
    """
    p_att = pl_pos + params.rhos @ pl_rot.T
    v_att = pl_vel + cross3(pl_omega, params.rhos) @ pl_rot.T
    d = quad_pos - p_att
    dist = np.linalg.norm(d, axis=1)
    u = d / np.maximum(dist, 1e-12)[:, None]
    rate = np.sum(u * (quad_vel - v_att), axis=1)
    stretched = params.stiffness * (dist - params.lengths) + params.cable_damping * rate
    mag = np.where(dist > params.lengths, np.maximum(stretched, 0.0), 0.0)
    return mag, u, p_att, v_att


def _accelerations(pl_pos, pl_vel, pl_rot, pl_omega, quad_pos, quad_vel,
                   quad_rot, quad_omega, thrusts, moments, ext_wrench, params):
    mag, u, _, _ = _cable_state(pl_pos, pl_vel, pl_rot, pl_omega,
                                quad_pos, quad_vel, params)
    cable_on_quad = -mag[:, None] * u
    cable_on_payload = mag[:, None] * u

    force = cable_on_payload.sum(axis=0) + ext_wrench[:3]
    force[2] -= params.payload.mass * GRAVITY
    pl_acc = force / params.payload.mass

    moment = cross3(params.rhos, cable_on_payload @ pl_rot).sum(axis=0)
    moment += ext_wrench[3:]
    moment -= cross3(pl_omega, params.payload.inertia @ pl_omega)
    pl_alpha = params.payload.inertia_inv @ moment

    thrust_world = quad_rot[:, :, 2] * thrusts[:, None]
    quad_acc = (thrust_world + cable_on_quad) / params.quad.mass
    quad_acc[:, 2] -= GRAVITY

    gyro = cross3(quad_omega, quad_omega @ params.quad.inertia.T)
    quad_alpha = (moments - gyro) @ params.quad.inertia_inv.T
    return pl_acc, pl_alpha, quad_acc, quad_alpha


def derivatives(world: WorldState, thrusts, moments,
                params: SystemParams) -> Derivatives:
    """Time derivative of the world state under the given per-robot controls."""
    thrusts = np.asarray(thrusts, dtype=float)
    moments = np.asarray(moments, dtype=float)
    if np.any(~np.isfinite(thrusts)) or np.any(~np.isfinite(moments)):
        raise ValueError("controls must be finite")
    if np.any(thrusts < 0.0):
        raise NegativeThrust("thrust commands must be nonnegative")
    pl = world.payload
    pl_acc, pl_alpha, quad_acc, quad_alpha = _accelerations(
        pl.pos, pl.vel, pl.rot, pl.omega, world.quad_pos, world.quad_vel,
        world.quad_rot, world.quad_omega, thrusts, moments,
        world.ext_wrench, params)
    return Derivatives(pl.vel.copy(), pl_acc, pl_alpha,
                       world.quad_vel.copy(), quad_acc, quad_alpha)


# Flat layout used by the integrator:
#   [pl_pos 3 | pl_vel 3 | pl_rot 9 | pl_omega 3 | quad_pos 3n | quad_vel 3n
#    | quad_rot 9n | quad_omega 3n]

def _pack(world: WorldState) -> np.ndarray:
    pl = world.payload
    return np.concatenate([
        pl.pos, pl.vel, pl.rot.ravel(), pl.omega,
        world.quad_pos.ravel(), world.quad_vel.ravel(),
        world.quad_rot.ravel(), world.quad_omega.ravel(),
    ])


def _unpack(y: np.ndarray, n: int):
    o = 18
    pl_pos, pl_vel = y[0:3], y[3:6]
    pl_rot = y[6:15].reshape(3, 3)
    pl_omega = y[15:18]
    quad_pos = y[o:o + 3 * n].reshape(n, 3)
    quad_vel = y[o + 3 * n:o + 6 * n].reshape(n, 3)
    quad_rot = y[o + 6 * n:o + 15 * n].reshape(n, 3, 3)
    quad_omega = y[o + 15 * n:o + 18 * n].reshape(n, 3)
    return pl_pos, pl_vel, pl_rot, pl_omega, quad_pos, quad_vel, quad_rot, quad_omega


def _deriv_flat(y, thrusts, moments, ext_wrench, params):
    n = params.n
    (pl_pos, pl_vel, pl_rot, pl_omega,
     quad_pos, quad_vel, quad_rot, quad_omega) = _unpack(y, n)
    pl_acc, pl_alpha, quad_acc, quad_alpha = _accelerations(
        pl_pos, pl_vel, pl_rot, pl_omega, quad_pos, quad_vel,
        quad_rot, quad_omega, thrusts, moments, ext_wrench, params)
    pl_rot_dot = pl_rot @ hat(pl_omega)
    quad_rot_dot = quad_rot @ _hat_stack(quad_omega)
    return np.concatenate([
        pl_vel, pl_acc, pl_rot_dot.ravel(), pl_alpha,
        quad_vel.ravel(), quad_acc.ravel(),
        quad_rot_dot.ravel(), quad_alpha.ravel(),
    ])


def _hat_stack(v: np.ndarray) -> np.ndarray:
    out = np.zeros((v.shape[0], 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def step_rk4(world: WorldState, thrusts, moments, dt: float,
             params: SystemParams) -> WorldState:
    """Advance one fixed step of classical RK4.

    Rotation entries are integrated through the matrix kinematics
    Rdot = R hat(omega) and projected back onto SO(3) afterwards, which keeps
    the scheme genuinely fourth order (per-stage exponential updates without
    commutator corrections are not).
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01]")
    thrusts = np.asarray(thrusts, dtype=float)
    moments = np.asarray(moments, dtype=float)
    if np.any(thrusts < 0.0):
        raise NegativeThrust("thrust commands must be nonnegative")

    y = _pack(world)
    w = world.ext_wrench
    k1 = _deriv_flat(y, thrusts, moments, w, params)
    k2 = _deriv_flat(y + 0.5 * dt * k1, thrusts, moments, w, params)
    k3 = _deriv_flat(y + 0.5 * dt * k2, thrusts, moments, w, params)
    k4 = _deriv_flat(y + dt * k3, thrusts, moments, w, params)
    y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(y_next)):
        raise NumericalBlowup(f"non-finite state at t={world.t + dt:.4f}")
    if np.max(np.abs(y_next)) > 1e6:
        raise NumericalBlowup(f"state norm exceeded 1e6 at t={world.t + dt:.4f}")

    n = params.n
    (pl_pos, pl_vel, pl_rot, pl_omega,
     quad_pos, quad_vel, quad_rot, quad_omega) = _unpack(y_next, n)
    pl_rot = renormalize_rotations(pl_rot)
    quad_rot = renormalize_rotations(quad_rot)
    return WorldState(
        PayloadState(pl_pos.copy(), pl_vel.copy(), pl_rot, pl_omega.copy()),
        quad_pos.copy(), quad_vel.copy(), quad_rot, quad_omega.copy(),
        world.ext_wrench.copy(), world.t + dt)


@dataclass
class NoiseConfig:
    """Standard deviations of the zero-mean Gaussian sensor noise."""

    pos: float = 0.0
    vel: float = 0.0
    euler: float = 0.0
    omega: float = 0.0
    cable_dir: float = 0.0
    cable_rate: float = 0.0
    payload_pos: float = 0.0
    payload_vel: float = 0.0
    payload_rot: float = 0.0
    payload_omega: float = 0.0

    @classmethod
    def zero(cls) -> "NoiseConfig":
        return cls()


@dataclass
class RobotMeasurement:
    """18-vector [pos, vel, euler_zyx, omega, q, qdot] plus a slack flag."""

    z: np.ndarray
    slack: bool


@dataclass
class PayloadOdometry:
    pos: np.ndarray
    vel: np.ndarray
    rot: np.ndarray
    omega: np.ndarray


@dataclass
class Observation:
    robots: list[RobotMeasurement]
    payload: PayloadOdometry


def observe(world: WorldState, params: SystemParams, noise: NoiseConfig,
            rng: np.random.Generator) -> Observation:
    """Sensor readout: per-robot 18-dim measurements plus payload odometry.

    The cable direction is the unit vector from each robot to its attach
    point, q = (p_att - x_k)/||.||, with rate (v_att - v_k)/l; a cable whose
    separation is below the rest length is flagged slack since the rate
    formula assumes tautness.
    """
    pl = world.payload
    p_att = attach_points(pl, params.rhos)
    v_att = attach_velocities(pl, params.rhos)
    d = p_att - world.quad_pos
    dist = np.linalg.norm(d, axis=1)
    q = d / np.maximum(dist, 1e-12)[:, None]
    qdot = (v_att - world.quad_vel) / params.lengths[:, None]
    slack = dist < params.lengths - 1e-9

    eulers, _ = rot_to_euler_zyx_batch(world.quad_rot)
    n = world.n
    z = np.concatenate([
        world.quad_pos + noise.pos * rng.standard_normal((n, 3)),
        world.quad_vel + noise.vel * rng.standard_normal((n, 3)),
        eulers + noise.euler * rng.standard_normal((n, 3)),
        world.quad_omega + noise.omega * rng.standard_normal((n, 3)),
        q + noise.cable_dir * rng.standard_normal((n, 3)),
        qdot + noise.cable_rate * rng.standard_normal((n, 3)),
    ], axis=1)
    z[:, 12:15] /= np.linalg.norm(z[:, 12:15], axis=1)[:, None]
    robots = [RobotMeasurement(z[k], bool(slack[k])) for k in range(n)]

    rot_meas = pl.rot
    if noise.payload_rot > 0.0:
        from .so3 import so3_exp
        rot_meas = pl.rot @ so3_exp(noise.payload_rot * rng.standard_normal(3))
    payload = PayloadOdometry(
        pl.pos + noise.payload_pos * rng.standard_normal(3),
        pl.vel + noise.payload_vel * rng.standard_normal(3),
        rot_meas,
        pl.omega + noise.payload_omega * rng.standard_normal(3),
    )
    return Observation(robots, payload)


def cable_tensions(world: WorldState, params: SystemParams):
    """Ground-truth tension magnitudes and payload-side force vectors.

    Returns (magnitudes (n,), payload-side vectors (n,3)); the vector pulls
    the payload toward each robot, the reaction on the robot is its negation.
    """
    pl = world.payload
    mag, u, _, _ = _cable_state(pl.pos, pl.vel, pl.rot, pl.omega,
                                world.quad_pos, world.quad_vel, params)
    return mag, mag[:, None] * u


def static_cable_tensions(params: SystemParams) -> np.ndarray:
    """Per-cable vertical tension magnitudes balancing gravity with vertical
    cables: minimum-norm solution of sum T = m g, sum T * rho = 0."""
    n = params.n
    a = np.vstack([np.ones(n), params.rhos[:, 0], params.rhos[:, 1]])
    b = np.array([params.payload.mass * GRAVITY, 0.0, 0.0])
    t = np.linalg.lstsq(a, b, rcond=None)[0]
    if np.any(t <= 0.0):
        raise ValueError("attach layout admits no all-taut vertical equilibrium")
    return t


def equilibrium_world(params: SystemParams, payload_pos=(0.0, 0.0, 1.0),
                      elastic: bool = True) -> WorldState:
    """Exact static equilibrium: vertical cables, robots above attach points.

    With ``elastic`` the cables carry their static stretch so the state is a
    true fixed point of the spring-damper truth model.
    """
    tensions = static_cable_tensions(params)
    pl = PayloadState(np.asarray(payload_pos, dtype=float), np.zeros(3),
                      np.eye(3), np.zeros(3))
    stretch = tensions / params.stiffness if elastic else np.zeros(params.n)
    height = params.lengths + stretch
    quad_pos = attach_points(pl, params.rhos) + height[:, None] * E3
    n = params.n
    return WorldState(pl, quad_pos, np.zeros((n, 3)),
                      np.tile(np.eye(3), (n, 1, 1)), np.zeros((n, 3)))


def equilibrium_controls(params: SystemParams):
    """Thrusts and moments that hold :func:`equilibrium_world` static."""
    tensions = static_cable_tensions(params)
    thrusts = params.quad.mass * GRAVITY + tensions
    return thrusts, np.zeros((params.n, 3))


def total_energy(world: WorldState, params: SystemParams) -> float:
    """Kinetic + gravitational + elastic energy of the whole assembly."""
    pl = world.payload
    e = 0.5 * params.payload.mass * pl.vel @ pl.vel
    e += 0.5 * pl.omega @ params.payload.inertia @ pl.omega
    e += params.payload.mass * GRAVITY * pl.pos[2]
    e += 0.5 * params.quad.mass * np.sum(world.quad_vel ** 2)
    e += 0.5 * np.sum(world.quad_omega * (world.quad_omega @ params.quad.inertia.T))
    e += params.quad.mass * GRAVITY * np.sum(world.quad_pos[:, 2])
    p_att = attach_points(pl, params.rhos)
    dist = np.linalg.norm(world.quad_pos - p_att, axis=1)
    ext = np.maximum(dist - params.lengths, 0.0)
    e += 0.5 * np.sum(params.stiffness * ext ** 2)
    return float(e)
