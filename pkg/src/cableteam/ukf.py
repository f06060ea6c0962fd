"""Per-robot unscented Kalman filter over the 19-dim cable-robot state.

State layout (one robot):

    [0:3]   position, world
    [3:6]   velocity, world
    [6:9]   attitude as ZYX Euler (yaw, pitch, roll)
    [9:12]  body rates
    [12:15] unit cable direction q (robot toward attach point)
    [15:18] cable direction rate
    [18]    tension magnitude

Input is the thrust scalar (from motor speeds) plus the body moment. The
process noise vector has 16 entries [n_f(3), n_mu(1), n_q(3), n_M(3),
n_Omega(3), n_qdot(3)] entering the model exactly where the discrete process
equations place them; the tension magnitude itself evolves as a random walk.
Measurements cover the first 18 states (everything except tension), so the
measurement model is the linear selection [I_18 | 0].

Prediction at the control rate propagates the mean only with zero process
noise; the full sigma-point predict runs once per measurement interval,
followed by the linear Kalman correction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .sim import GRAVITY
from .so3 import (
    cross3,
    euler_zyx_to_rot_batch,
    rot_to_euler_zyx_batch,
    so3_exp_batch,
    wrap_angle,
)

log = logging.getLogger(__name__)

STATE_DIM = 19
NOISE_DIM = 16
MEAS_DIM = 18
EULER = slice(6, 9)
CABLE = slice(12, 15)


@dataclass
class UkfBelief:
    mean: np.ndarray
    cov: np.ndarray

    def copy(self) -> "UkfBelief":
        return UkfBelief(self.mean.copy(), self.cov.copy())


@dataclass
class UkfInput:
    """Thrust (from motor speeds), body moment, and the commanded attach-point
    acceleration including the gravity term (defaults to the quasi-static
    hover value g e3 when the controller does not supply one)."""

    thrust: float
    moment: np.ndarray
    attach_accel: np.ndarray | None = None

    def __post_init__(self):
        if self.thrust < 0.0:
            raise ValueError("thrust must be nonnegative")
        self.moment = np.asarray(self.moment, dtype=float)
        if self.attach_accel is None:
            self.attach_accel = np.array([0.0, 0.0, GRAVITY])
        else:
            self.attach_accel = np.asarray(self.attach_accel, dtype=float)


@dataclass
class UkfNoise:
    """Process noise standard deviations (per predict step) and measurement
    noise standard deviations for the 18 measured states."""

    thrust: float = 0.02        # n_f, N per axis
    tension: float = 0.02       # n_mu, N (random-walk step)
    cable_dir: float = 1e-4     # n_q
    moment: float = 1e-4        # n_M, N m
    omega: float = 1e-3         # n_Omega
    cable_rate: float = 1e-3    # n_qdot
    meas_pos: float = 1e-3
    meas_vel: float = 1e-2
    meas_euler: float = 3.5e-3
    meas_omega: float = 5e-3
    meas_cable_dir: float = 2e-3
    meas_cable_rate: float = 1e-2

    def process_diag(self) -> np.ndarray:
        return np.concatenate([
            np.full(3, self.thrust),
            [self.tension],
            np.full(3, self.cable_dir),
            np.full(3, self.moment),
            np.full(3, self.omega),
            np.full(3, self.cable_rate),
        ]) ** 2

    def measurement_diag(self) -> np.ndarray:
        return np.concatenate([
            np.full(3, self.meas_pos),
            np.full(3, self.meas_vel),
            np.full(3, self.meas_euler),
            np.full(3, self.meas_omega),
            np.full(3, self.meas_cable_dir),
            np.full(3, self.meas_cable_rate),
        ]) ** 2


def _safe_cholesky(mat: np.ndarray, counters: dict) -> np.ndarray:
    """Cholesky with escalating jitter; repairs are counted, never silent.

    Diagonal matrices (including semidefinite ones with zero entries) take an
    exact elementwise square-root path.
    """
    diag = np.diagonal(mat)
    if np.all(diag >= 0.0) and not np.any(mat[~np.eye(mat.shape[0], dtype=bool)]):
        return np.diag(np.sqrt(diag))
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    counters["covariance_repairs"] = counters.get("covariance_repairs", 0) + 1
    log.warning("covariance repair: jittering before Cholesky")
    jitter = 1e-12 * max(1.0, float(np.trace(mat)) / mat.shape[0])
    for _ in range(12):
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise np.linalg.LinAlgError("covariance not repairable")


class TensionUkf:
    """Sigma-point filter for one robot; instances are independent."""

    def __init__(self, mass: float, inertia: np.ndarray, cable_length: float,
                 noise: UkfNoise, alpha: float = 1e-3, beta: float = 2.0,
                 kappa: float = 0.0):
        self.mass = float(mass)
        inertia = np.asarray(inertia, dtype=float)
        self.inertia = np.diag(inertia) if inertia.ndim == 1 else inertia
        self.inertia_inv = np.linalg.inv(self.inertia)
        self.cable_length = float(cable_length)
        self.noise = noise
        self.meas_cov = np.diag(noise.measurement_diag())
        # diagonal noise: the matrix square root is elementwise, zero-safe
        self._noise_chol = np.diag(np.sqrt(noise.process_diag()))

        dim = STATE_DIM + NOISE_DIM
        lam = alpha * alpha * (dim + kappa) - dim
        self._spread = np.sqrt(dim + lam)
        self._wm = np.full(2 * dim + 1, 1.0 / (2.0 * (dim + lam)))
        self._wc = self._wm.copy()
        self._wm[0] = lam / (dim + lam)
        self._wc[0] = self._wm[0] + (1.0 - alpha * alpha + beta)
        self.counters: dict = {"covariance_repairs": 0, "tension_clamps": 0,
                               "gimbal_warnings": 0}

    # -- process model -------------------------------------------------------

    def _process(self, states: np.ndarray, noises: np.ndarray,
                 thrust: float, moment: np.ndarray, attach_accel: np.ndarray,
                 dt: float) -> np.ndarray:
        m, length = self.mass, self.cable_length
        x, v = states[:, 0:3], states[:, 3:6]
        eul, om = states[:, 6:9], states[:, 9:12]
        q, qd, mu = states[:, 12:15], states[:, 15:18], states[:, 18]
        n_f, n_mu = noises[:, 0:3], noises[:, 3]
        n_q, n_m = noises[:, 4:7], noises[:, 7:10]
        n_om, n_qd = noises[:, 10:13], noises[:, 13:16]

        rot = euler_zyx_to_rot_batch(eul)
        body_force = n_f.copy()
        body_force[:, 2] += thrust
        f_world = np.einsum("nij,nj->ni", rot, body_force)

        acc = (f_world + (q + n_q) * (mu + n_mu)[:, None]) / m
        acc[:, 2] -= GRAVITY

        out = np.empty_like(states)
        out[:, 0:3] = x + v * dt + 0.5 * acc * dt * dt
        out[:, 3:6] = v + acc * dt

        # World-frame attitude increment hat(R Omega dt) composed onto the
        # previous orientation from the left, which is identical to body-rate
        # integration R exp(hat(Omega dt)). The rate noise drives the angle
        # update as well, so attitude uncertainty grows between corrections.
        om_noisy = om + n_om
        rot_new = rot @ so3_exp_batch(om_noisy * dt)
        eul_new, gimbal = rot_to_euler_zyx_batch(rot_new)
        if gimbal:
            self.counters["gimbal_warnings"] += 1
            log.warning("gimbal-adjacent attitude during propagation")
        out[:, 6:9] = eul_new

        torque = moment + n_m - cross3(om_noisy, om_noisy @ self.inertia.T)
        out[:, 9:12] = om + (torque @ self.inertia_inv.T) * dt

        # cable direction dynamics, qdd = hat(q)^2 (F - m a) / (m l)
        # - |qdot|^2 q, with a the commanded attach acceleration (gravity
        # term included)
        residual = f_world - m * attach_accel
        radial = np.sum(q * residual, axis=1)
        qq = np.sum(q * q, axis=1)
        tangent = q * radial[:, None] - residual * qq[:, None]
        qdd = tangent / (m * length) - np.sum(qd * qd, axis=1)[:, None] * q
        out[:, 12:15] = q + qd * dt + 0.5 * qdd * dt * dt + n_q
        out[:, 15:18] = qd + qdd * dt + n_qd
        out[:, 18] = mu + n_mu
        return out

    def predict_mean(self, mean: np.ndarray, u: UkfInput, dt: float) -> np.ndarray:
        """Zero-noise mean propagation used between measurement updates."""
        out = self._process(mean[None, :], np.zeros((1, NOISE_DIM)),
                            u.thrust, u.moment, u.attach_accel, dt)[0]
        return self._canonicalize(out)

    def predict(self, belief: UkfBelief, u: UkfInput, dt: float) -> UkfBelief:
        """Full augmented-state unscented prediction."""
        if not 0.0 < dt <= 0.05:
            raise ValueError("dt must lie in (0, 0.05]")
        dim = STATE_DIM + NOISE_DIM
        s_state = _safe_cholesky(belief.cov, self.counters)

        count = 2 * dim + 1
        states = np.tile(belief.mean, (count, 1))
        noises = np.zeros((count, NOISE_DIM))
        sd = self._spread * s_state
        sn = self._spread * self._noise_chol
        states[1:STATE_DIM + 1] += sd.T
        states[dim + 1:dim + STATE_DIM + 1] -= sd.T
        noises[STATE_DIM + 1:dim + 1] += sn.T
        noises[dim + STATE_DIM + 1:] -= sn.T

        prop = self._process(states, noises, u.thrust, u.moment,
                             u.attach_accel, dt)

        # mean in deviation form around sigma point 0: the huge central
        # weight multiplies an exact zero instead of cancelling numerically
        dev0 = prop - prop[0]
        dev0[:, EULER] = wrap_angle(prop[:, EULER] - prop[0, EULER])
        mean = prop[0] + dev0.T @ self._wm
        mean[EULER] = wrap_angle(mean[EULER])

        dev = prop - mean
        dev[:, EULER] = wrap_angle(prop[:, EULER] - mean[EULER])
        cov = (dev * self._wc[:, None]).T @ dev
        cov = 0.5 * (cov + cov.T)
        return UkfBelief(self._canonicalize(mean), cov)

    def update(self, belief: UkfBelief, z: np.ndarray,
               meas_cov: np.ndarray | None = None) -> tuple[UkfBelief, np.ndarray]:
        """Linear measurement correction over the first 18 states.

        Returns the posterior belief and the innovation vector.
        """
        z = np.asarray(z, dtype=float)
        if not np.all(np.isfinite(z)):
            raise ValueError("measurement must be finite")
        r = self.meas_cov if meas_cov is None else meas_cov
        innovation = z - belief.mean[:MEAS_DIM]
        innovation[EULER] = wrap_angle(innovation[EULER])

        s = belief.cov[:MEAS_DIM, :MEAS_DIM] + r
        gain = np.linalg.solve(s, belief.cov[:MEAS_DIM, :]).T  # (19,18)
        mean = belief.mean + gain @ innovation
        cov = belief.cov - gain @ s @ gain.T
        cov = 0.5 * (cov + cov.T)
        return UkfBelief(self._canonicalize(mean), cov), innovation

    def _canonicalize(self, mean: np.ndarray) -> np.ndarray:
        mean[EULER] = wrap_angle(mean[EULER])
        norm = np.linalg.norm(mean[CABLE])
        if norm > 1e-9:
            mean[CABLE] /= norm
        if mean[18] < 0.0:
            self.counters["tension_clamps"] += 1
            log.warning("tension estimate clamped at zero")
            mean[18] = 0.0
        return mean

    def estimated_tension(self, belief: UkfBelief) -> tuple[float, np.ndarray]:
        """Tension magnitude and the cable force acting on the quadrotor.

        The force on the robot points along q (robot toward attach point);
        the payload-side tension vector is its negation.
        """
        mu = float(belief.mean[18])
        q = belief.mean[CABLE]
        q = q / max(np.linalg.norm(q), 1e-12)
        return mu, mu * q


def initial_belief(z: np.ndarray, tension_guess: float,
                   tension_var: float = 0.25,
                   cov_scale: float = 1.0) -> UkfBelief:
    """Belief from a first measurement plus a static tension guess."""
    mean = np.zeros(STATE_DIM)
    mean[:MEAS_DIM] = z
    mean[18] = tension_guess
    diag = np.concatenate([
        np.full(3, 1e-4), np.full(3, 1e-3), np.full(3, 1e-4),
        np.full(3, 1e-3), np.full(3, 1e-4), np.full(3, 1e-3),
    ]) * cov_scale
    return UkfBelief(mean, np.diag(np.append(diag, tension_var)))


class ScheduledFilter:
    """Runs one robot's filter at split rates.

    Between measurements the live mean advances with zero-noise predictions;
    inputs and elapsed time accumulate so the sigma-point predict can bridge
    the whole measurement interval when the update arrives.
    """

    def __init__(self, ukf: TensionUkf, belief: UkfBelief):
        self.ukf = ukf
        self.belief = belief
        self.live_mean = belief.mean.copy()
        self._pending: list[tuple[UkfInput, float]] = []

    def predict_step(self, u: UkfInput, dt: float) -> None:
        self.live_mean = self.ukf.predict_mean(self.live_mean, u, dt)
        self._pending.append((u, dt))

    def measurement_step(self, z: np.ndarray) -> np.ndarray:
        # replay the exact input history so the sigma propagation does not
        # smear ramping commands across the measurement interval
        for u, dt in self._pending:
            self.belief = self.ukf.predict(self.belief, u, dt)
        self.belief, innovation = self.ukf.update(self.belief, z)
        self.live_mean = self.belief.mean.copy()
        self._pending.clear()
        return innovation

    def estimated_tension(self) -> tuple[float, np.ndarray]:
        mu = float(self.live_mean[18])
        q = self.live_mean[CABLE]
        q = q / max(np.linalg.norm(q), 1e-12)
        return mu, mu * q

    def cable_state(self) -> tuple[np.ndarray, np.ndarray]:
        return self.live_mean[CABLE].copy(), self.live_mean[15:18].copy()

    def attitude(self) -> tuple[np.ndarray, np.ndarray]:
        from .so3 import euler_zyx_to_rot
        return euler_zyx_to_rot(self.live_mean[EULER]), self.live_mean[9:12].copy()
