"""Closed-loop orchestration of simulator, estimators and controllers.

Each control step runs the full pipeline

    observe -> per-robot filters -> payload wrench estimate -> admittance
    -> payload controller -> tension allocation -> robot controllers
    -> simulator substeps

and emits exactly one log record. Runs are deterministic for a fixed config
and seed; externally injected commands are recorded with their application
step so a logged interactive session can be replayed headlessly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .admittance import AdmittanceGains, AdmittanceState, TensionMailbox
from .allocation import AllocationGeometry, SafetyParams, build_p
from .config import ScenarioConfig
from .payload_control import PayloadReference
from .sim import (
    GRAVITY,
    NumericalBlowup,
    PayloadState,
    WorldState,
    attach_points,
    cable_tensions,
    equilibrium_world,
    motor_thrust,
    observe,
    speeds_for_thrust,
    static_cable_tensions,
    step_rk4,
)
from .so3 import cross3, euler_zyx_rates_to_omega, euler_zyx_to_rot, rot_to_euler_zyx_batch
from .trajectory import (
    HumanPath,
    WrenchEvent,
    WrenchScript,
    reference_from_config,
)
from .ukf import ScheduledFilter, UkfInput, initial_belief

SCHEMA_FIELDS = [
    "t", "payload_pos", "payload_vel", "payload_euler", "payload_omega",
    "quad_pos", "des_pos", "des_vel", "des_euler", "ref_pos",
    "est_wrench", "est_wrench_raw", "applied_wrench",
    "tension_est", "tension_true", "thrust",
    "nullspace_residual", "alloc_objective", "alloc_converged",
    "alloc_infeasible", "alloc_degenerate",
    "min_human_dist", "min_robot_dist", "human_pos",
    "adm_offset", "adm_rate", "saturated", "stale_wrench",
]


class RunLog:
    """Columnar per-step records plus injected-command events."""

    def __init__(self, steps: int, n: int):
        self.n = n
        self.data = {
            "t": np.zeros(steps),
            "payload_pos": np.zeros((steps, 3)),
            "payload_vel": np.zeros((steps, 3)),
            "payload_euler": np.zeros((steps, 3)),
            "payload_omega": np.zeros((steps, 3)),
            "quad_pos": np.zeros((steps, n, 3)),
            "des_pos": np.zeros((steps, 3)),
            "des_vel": np.zeros((steps, 3)),
            "des_euler": np.zeros((steps, 3)),
            "ref_pos": np.zeros((steps, 3)),
            "est_wrench": np.zeros((steps, 6)),
            "est_wrench_raw": np.zeros((steps, 6)),
            "applied_wrench": np.zeros((steps, 6)),
            "tension_est": np.zeros((steps, n)),
            "tension_true": np.zeros((steps, n)),
            "thrust": np.zeros((steps, n)),
            "nullspace_residual": np.zeros(steps),
            "alloc_objective": np.zeros(steps),
            "alloc_converged": np.ones(steps, dtype=np.int8),
            "alloc_infeasible": np.zeros(steps, dtype=np.int8),
            "alloc_degenerate": np.zeros(steps, dtype=np.int8),
            "min_human_dist": np.full(steps, np.inf),
            "min_robot_dist": np.full(steps, np.inf),
            "human_pos": np.full((steps, 3), np.nan),
            "adm_offset": np.zeros((steps, 6)),
            "adm_rate": np.zeros((steps, 6)),
            "saturated": np.zeros(steps, dtype=np.int8),
            "stale_wrench": np.zeros(steps, dtype=np.int8),
        }
        self.events: list[dict] = []
        self.meta: dict = {}
        self.count = 0

    def append(self, record: dict) -> None:
        i = self.count
        for key, value in record.items():
            self.data[key][i] = value
        self.count += 1

    def trim(self) -> None:
        for key in self.data:
            self.data[key] = self.data[key][:self.count]

    def column(self, key: str) -> np.ndarray:
        return self.data[key][:self.count]

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            header = {"schema": "cableteam-run/1", "fields": SCHEMA_FIELDS,
                      "n": self.n, "meta": self.meta, "events": self.events}
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for i in range(self.count):
                row = {}
                for key in SCHEMA_FIELDS:
                    value = self.data[key][i]
                    row[key] = value.tolist() if isinstance(value, np.ndarray) \
                        else float(value)
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    def to_csv(self, path) -> None:
        columns: list[tuple[str, np.ndarray]] = []
        for key in SCHEMA_FIELDS:
            arr = self.column(key)
            if arr.ndim == 1:
                columns.append((key, arr.astype(float)))
            elif arr.ndim == 2:
                for j in range(arr.shape[1]):
                    columns.append((f"{key}_{j}", arr[:, j].astype(float)))
            else:
                for j in range(arr.shape[1]):
                    for k in range(arr.shape[2]):
                        columns.append((f"{key}_{j}_{k}", arr[:, j, k].astype(float)))
        with open(path, "w") as fh:
            fh.write(",".join(name for name, _ in columns) + "\n")
            stacked = np.column_stack([col for _, col in columns])
            for row in stacked:
                fh.write(",".join(repr(v) for v in row) + "\n")


@dataclass
class Frame:
    """Snapshot handed to the interaction service every control step."""

    t: float
    payload_pos: np.ndarray
    payload_euler: np.ndarray
    payload_vel: np.ndarray
    payload_omega: np.ndarray
    quad_pos: np.ndarray
    cable_taut: np.ndarray
    cable_dirs: np.ndarray
    tension_est: np.ndarray
    est_wrench: np.ndarray
    applied_wrench: np.ndarray
    des_pos: np.ndarray
    des_euler: np.ndarray
    ref_pos: np.ndarray
    human_pos: np.ndarray | None
    min_human_dist: float
    min_robot_dist: float
    safety_mode: str
    human_radius: float
    robot_radius: float


class ScenarioRunner:
    """Owns the world and the full control stack for one scenario."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self._build(config.seed)

    def _build(self, seed: int) -> None:
        cfg = self.config
        self.params = cfg.system_params()
        self.noise = cfg.noise_config()
        self.rng = np.random.default_rng(seed)
        self.seed = seed

        team = cfg.raw["team"]
        sim = cfg.raw["simulation"]
        if sim["init_at_equilibrium"]:
            self.world = equilibrium_world(self.params, team["payload_start"])
        else:
            self.world = equilibrium_world(self.params, team["payload_start"],
                                           elastic=False)
        self.reference = reference_from_config(cfg.raw["reference"])
        self.script = WrenchScript.from_config(cfg.raw["script"]["wrenches"])
        self.human_path = HumanPath.from_config(cfg.raw["script"]["human"])

        self.payload_ctl = cfg.payload_controller()
        self.robot_ctls = cfg.robot_controllers()
        self.allocator = cfg.allocator()
        self.admittance = cfg.admittance_controller()
        self.adm_enabled = bool(cfg.raw["admittance"]["enabled"])
        self.adm_state = AdmittanceState.zero()
        self.estimator = cfg.wrench_estimator()
        self.mailbox = TensionMailbox(cfg.n)
        self.ukf = cfg.tension_ukf()
        self.filters: list[ScheduledFilter] | None = None
        try:
            self._tension_guess = static_cable_tensions(self.params)
        except ValueError:
            self._tension_guess = np.full(
                cfg.n, self.params.payload.mass * GRAVITY / cfg.n)

        self.control_dt = cfg.control_dt
        self.sim_dt = cfg.raw["simulation"]["sim_dt"]
        self.substeps = cfg.sim_substeps
        self.meas_every = cfg.measurement_every
        self.yaw_des = float(cfg.raw["robot_controller"]["yaw"])

        self.step_index = 0
        self.log = RunLog(cfg.steps, cfg.n)
        self.log.meta = {"seed": seed, "config": cfg.raw,
                         "notes": ["attitude feedforward omega_dot_des held at zero",
                                   "robot controllers consume filter estimates"]}
        self._live_wrenches: list[WrenchEvent] = []
        self._human_override: np.ndarray | None = None
        self._payload_odom = None

    # -- live commands (applied between control steps) -----------------------

    def inject_wrench(self, force, moment, duration: float) -> None:
        force = np.asarray(force, dtype=float)
        moment = np.asarray(moment, dtype=float)
        self._live_wrenches.append(
            WrenchEvent(self.t, float(duration), force, moment))
        self.log.events.append({
            "t": self.t, "step": self.step_index, "kind": "apply_wrench",
            "force": force.tolist(), "moment": moment.tolist(),
            "duration": float(duration)})

    def set_human_position(self, position) -> None:
        self._human_override = np.asarray(position, dtype=float)
        self.log.events.append({
            "t": self.t, "step": self.step_index, "kind": "set_human",
            "position": self._human_override.tolist()})

    def set_admittance_gains(self, mass, damping, stiffness) -> None:
        gains = AdmittanceGains(np.asarray(mass, dtype=float),
                                np.asarray(damping, dtype=float),
                                np.asarray(stiffness, dtype=float))
        self.admittance.set_gains(gains)
        self.log.events.append({
            "t": self.t, "step": self.step_index, "kind": "set_admittance_gains",
            "mass": gains.mass.tolist(), "damping": gains.damping.tolist(),
            "stiffness": gains.stiffness.tolist()})

    def set_safety_mode(self, mode: str, human_radius: float | None = None,
                        robot_radius: float | None = None) -> None:
        params = self.allocator.params
        new = SafetyParams(
            mode=mode,
            gain=params.gain, decay=params.decay,
            human_radius=human_radius if human_radius is not None else params.human_radius,
            robot_radius=robot_radius if robot_radius is not None else params.robot_radius,
            max_iterations=params.max_iterations, tolerance=params.tolerance,
            penalty_growth=params.penalty_growth, max_tension=params.max_tension)
        self.allocator.params = new
        self.allocator.reset()
        self.log.events.append({
            "t": self.t, "step": self.step_index, "kind": "set_safety_mode",
            "mode": mode, "human_radius": new.human_radius,
            "robot_radius": new.robot_radius})

    def reset(self, seed: int | None = None) -> None:
        self._build(self.seed if seed is None else int(seed))

    # -- stepping -------------------------------------------------------------

    @property
    def t(self) -> float:
        return self.step_index * self.control_dt

    def human_position(self) -> np.ndarray | None:
        if self._human_override is not None:
            return self._human_override
        if self.human_path is not None:
            return self.human_path.at(self.t)
        return None

    def applied_wrench(self) -> np.ndarray:
        w = self.script.wrench_at(self.t)
        for event in self._live_wrenches:
            w += event.value_at(self.t)
        return w

    def step(self) -> Frame:
        cfg = self.config
        t = self.t
        params = self.params
        # onboard sensing (robot attitude, cable states) refreshes every
        # control step; the external motion-capture feed (payload odometry,
        # filter measurement updates) arrives at the measurement rate and is
        # held in between
        obs = observe(self.world, params, self.noise, self.rng)
        meas_due = self.step_index % self.meas_every == 0
        if meas_due or self._payload_odom is None:
            self._payload_odom = obs.payload

        if self.filters is None:
            self.filters = [
                ScheduledFilter(self.ukf, initial_belief(
                    obs.robots[k].z, self._tension_guess[k],
                    cfg.raw["ukf"]["init_tension_var"],
                    cfg.raw["ukf"]["init_cov_scale"]))
                for k in range(cfg.n)
            ]
        elif meas_due:
            for k, filt in enumerate(self.filters):
                filt.measurement_step(obs.robots[k].z)

        tension_est = np.zeros(cfg.n)
        for k, filt in enumerate(self.filters):
            mag, force_on_quad = filt.estimated_tension()
            tension_est[k] = mag
            self.mailbox.put(k, t, -force_on_quad)  # payload-side vector

        odom = self._payload_odom
        geometry = AllocationGeometry.build(
            params.rhos, odom.rot, odom.pos, params.lengths)
        p = build_p(geometry)
        wrench_est, wrench_raw, stale = self.estimator.step(self.mailbox, p, t)

        base = self.reference.at(t)
        traj_pos = np.concatenate([base.pos, base.euler_rpy])
        traj_vel = np.concatenate([base.vel, base.euler_rate])
        traj_acc = np.concatenate([base.acc, np.zeros(3)])
        if self.adm_enabled:
            des_pos, des_vel, _, self.adm_state = self.admittance.step(
                self.adm_state, wrench_est, traj_pos, traj_vel, traj_acc)
        else:
            des_pos, des_vel = traj_pos, traj_vel

        euler_ypr = des_pos[3:6][::-1]
        rate_ypr = des_vel[3:6][::-1]
        ref = PayloadReference(
            pos=des_pos[:3], vel=des_vel[:3], acc=base.acc,
            rot=euler_zyx_to_rot(euler_ypr),
            omega=euler_zyx_rates_to_omega(euler_ypr, rate_ypr),
            omega_dot=np.zeros(3))
        cmd = self.payload_ctl.desired_wrench(odom, ref, self.control_dt)

        human = self.human_position()
        alloc = self.allocator.allocate(
            np.concatenate([cmd.force, cmd.moment]), geometry, human)

        thrusts = np.zeros(cfg.n)
        moments = np.zeros((cfg.n, 3))
        saturated = False
        rot_meas, omega_meas = odom.rot, odom.omega
        for k in range(cfg.n):
            rho = params.rhos[k]
            accel_att = cmd.accel_cmd + rot_meas @ (
                cross3(cmd.alpha_cmd, rho)
                + cross3(omega_meas, cross3(omega_meas, rho)))
            # controllers run on the fresh onboard measurements; the filters
            # only supply tension estimates
            z = obs.robots[k].z
            rc = self.robot_ctls[k].command(
                alloc.mu_des[3 * k:3 * k + 3], z[12:15], z[15:18],
                euler_zyx_to_rot(z[6:9]), z[9:12], accel_att,
                self.control_dt, yaw_des=self.yaw_des)
            thrusts[k] = rc.thrust
            moments[k] = rc.moment
            saturated = saturated or rc.saturated
            # filter input goes through the motor-speed channel; the commanded
            # attach acceleration feeds the cable-direction process model
            speeds = speeds_for_thrust(rc.thrust, params.quad.motor_constant)
            f_meas = motor_thrust(speeds, params.quad.motor_constant)
            self.filters[k].predict_step(
                UkfInput(f_meas, rc.moment, accel_att), self.control_dt)

        tension_true, _ = cable_tensions(self.world, params)
        quad_pos = self.world.quad_pos.copy()
        min_human = np.inf
        if human is not None:
            min_human = float(np.min(np.linalg.norm(quad_pos - human, axis=1)))
        diffs = quad_pos[:, None, :] - quad_pos[None, :, :]
        iu = np.triu_indices(cfg.n, 1)
        min_robot = float(np.min(np.linalg.norm(diffs, axis=2)[iu]))

        pl = self.world.payload
        payload_euler, _ = rot_to_euler_zyx_batch(pl.rot[None])
        applied = self.applied_wrench()

        record = {
            "t": t,
            "payload_pos": pl.pos, "payload_vel": pl.vel,
            "payload_euler": payload_euler[0], "payload_omega": pl.omega,
            "quad_pos": quad_pos,
            "des_pos": des_pos[:3], "des_vel": des_vel[:3],
            "des_euler": des_pos[3:6], "ref_pos": base.pos,
            "est_wrench": wrench_est, "est_wrench_raw": wrench_raw,
            "applied_wrench": applied,
            "tension_est": tension_est, "tension_true": tension_true,
            "thrust": thrusts,
            "nullspace_residual": alloc.diagnostics.nullspace_residual,
            "alloc_objective": alloc.diagnostics.objective,
            "alloc_converged": int(alloc.diagnostics.converged),
            "alloc_infeasible": int(alloc.diagnostics.infeasible),
            "alloc_degenerate": int(alloc.diagnostics.degenerate),
            "min_human_dist": min_human, "min_robot_dist": min_robot,
            "human_pos": human if human is not None else np.full(3, np.nan),
            "adm_offset": self.adm_state.offset, "adm_rate": self.adm_state.rate,
            "saturated": int(saturated), "stale_wrench": int(stale),
        }
        self.log.append(record)

        self.world.ext_wrench = applied
        try:
            for _ in range(self.substeps):
                self.world = step_rk4(self.world, thrusts, moments,
                                      self.sim_dt, params)
        except NumericalBlowup as exc:
            raise NumericalBlowup(f"{exc} (control step {self.step_index})") from exc
        self.step_index += 1

        p_att = attach_points(pl, params.rhos)
        dist = np.linalg.norm(quad_pos - p_att, axis=1)
        q_dirs = (p_att - quad_pos) / np.maximum(dist, 1e-12)[:, None]
        return Frame(
            t=t, payload_pos=pl.pos.copy(), payload_euler=payload_euler[0],
            payload_vel=pl.vel.copy(), payload_omega=pl.omega.copy(),
            quad_pos=quad_pos, cable_taut=dist >= params.lengths - 1e-6,
            cable_dirs=q_dirs, tension_est=tension_est,
            est_wrench=wrench_est.copy(), applied_wrench=applied,
            des_pos=des_pos[:3].copy(), des_euler=des_pos[3:6].copy(),
            ref_pos=base.pos, human_pos=None if human is None else human.copy(),
            min_human_dist=min_human, min_robot_dist=min_robot,
            safety_mode=self.allocator.params.mode,
            human_radius=self.allocator.params.human_radius,
            robot_radius=self.allocator.params.robot_radius)

    def run(self) -> RunLog:
        for _ in range(self.config.steps):
            self.step()
        self.log.meta["ukf_counters"] = dict(self.ukf.counters)
        self.log.trim()
        return self.log


def run_scenario(config: ScenarioConfig) -> RunLog:
    """Build a runner, execute the configured duration, return the log."""
    return ScenarioRunner(config).run()
