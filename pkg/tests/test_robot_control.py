import numpy as np
import pytest

from cableteam.allocation import DegenerateTension
from cableteam.robot_control import CableGains, RobotController
from cableteam.so3 import so3_exp

RNG = np.random.default_rng(3)

MASS = 0.25
INERTIA = np.array([2.1e-3, 2.1e-3, 4.0e-3])
DT = 0.0025


def make_controller():
    gains = CableGains(kq=np.full(3, 40.0), komega=np.full(3, 10.0),
                       kr=np.full(3, 1.3), komega_att=np.full(3, 0.09))
    return RobotController(gains, MASS, INERTIA, cable_length=1.0)


def test_desired_cable_direction_sign():
    ctl = make_controller()
    q_des, _, _ = ctl.desired_cable(np.array([0.0, 0.0, 2.0]), DT)
    assert np.allclose(q_des, [0.0, 0.0, -1.0])


def test_desired_cable_rejects_tiny_tension():
    ctl = make_controller()
    with pytest.raises(DegenerateTension):
        ctl.desired_cable(np.array([0.0, 0.0, 1e-7]), DT)


def test_constant_tension_rate_decays_to_zero():
    ctl = make_controller()
    mu = np.array([0.3, 0.1, 1.0])
    qdot = None
    for _ in range(400):
        _, _, qdot = ctl.desired_cable(mu, DT)
    assert np.linalg.norm(qdot) < 1e-12


def test_omega_des_perpendicular_to_q_des():
    ctl = make_controller()
    for _ in range(200):
        mu = RNG.normal(size=3)
        if np.linalg.norm(mu) < 1e-3:
            continue
        q_des, omega_des, _ = ctl.desired_cable(mu, DT)
        assert abs(q_des @ omega_des) < 1e-9


def test_direction_invariant_to_positive_scaling():
    mu = np.array([0.2, -0.4, 1.1])
    for scale in (2.0, 4.0, 0.5):
        a = make_controller()
        b = make_controller()
        qa, _, _ = a.desired_cable(mu, DT)
        qb, _, _ = b.desired_cable(scale * mu, DT)
        assert np.array_equal(qa, qb)
    a, b = make_controller(), make_controller()
    qa, _, _ = a.desired_cable(mu, DT)
    qb, _, _ = b.desired_cable(3.7 * mu, DT)
    assert np.allclose(qa, qb, atol=1e-12)


def test_hover_force_is_weight_plus_load_share():
    ctl = make_controller()
    q = np.array([0.0, 0.0, -1.0])
    mu = np.array([0.0, 0.0, 0.310 * 9.81 / 3.0])
    q_des, omega_des, qdot_des = ctl.desired_cable(mu, DT)
    accel = 9.81 * np.array([0.0, 0.0, 1.0])
    f = ctl.cable_force(q, np.zeros(3), q_des, omega_des, qdot_des, mu, accel)
    expected_z = MASS * 9.81 + 0.310 * 9.81 / 3.0
    assert np.allclose(f, [0.0, 0.0, expected_z], atol=1e-10)


def test_cable_error_zero_when_aligned():
    q = np.array([0.0, 0.0, -1.0])
    assert np.allclose(np.cross(q, q), 0.0)


def test_force_decomposition_orthogonal():
    ctl = make_controller()
    for _ in range(100):
        q = RNG.normal(size=3)
        q /= np.linalg.norm(q)
        qdot = np.cross(RNG.normal(size=3), q)  # rate tangent to the sphere
        mu = RNG.normal(size=3)
        if np.linalg.norm(mu) < 1e-3:
            continue
        q_des, omega_des, qdot_des = ctl.desired_cable(mu, DT)
        accel = RNG.normal(size=3)
        par, perp = ctl.cable_force_parts(q, qdot, q_des, omega_des,
                                          qdot_des, mu, accel)
        assert abs(par @ perp) < 1e-9
        # parallel part is the projection of the total onto the cable axis
        total = par + perp
        assert np.allclose(q * (q @ total), par, atol=1e-9)


def test_hover_thrust_projection_and_identity_attitude():
    ctl = make_controller()
    f_vec = np.array([0.0, 0.0, MASS * 9.81])
    cmd = ctl.attitude_thrust(f_vec, np.eye(3), np.zeros(3), 0.0, 0.0)
    assert cmd.thrust == pytest.approx(2.4525, abs=1e-10)
    assert np.allclose(cmd.moment, 0.0, atol=1e-12)
    assert not cmd.saturated and not cmd.degenerate


def test_tilted_force_projection():
    ctl = make_controller()
    angle = np.deg2rad(10.0)
    f_vec = 3.0 * np.array([np.sin(angle), 0.0, np.cos(angle)])
    cmd = ctl.attitude_thrust(f_vec, np.eye(3), np.zeros(3), 0.0, 0.0)
    assert cmd.thrust == pytest.approx(3.0 * np.cos(angle), abs=1e-12)
    # independent projection oracle
    assert cmd.thrust == pytest.approx(f_vec @ np.eye(3)[:, 2], abs=1e-12)


def test_thrust_saturation_flag():
    ctl = make_controller()
    cmd = ctl.attitude_thrust(np.array([0.0, 0.0, 50.0]), np.eye(3),
                              np.zeros(3), 0.0, 0.0)
    assert cmd.saturated
    assert cmd.thrust == 8.0


def test_degenerate_force_hover_fallback():
    ctl = make_controller()
    cmd = ctl.attitude_thrust(np.zeros(3), np.eye(3), np.zeros(3), 0.0, 0.0)
    assert cmd.degenerate
    assert cmd.thrust == pytest.approx(MASS * 9.81, abs=1e-12)


def test_moment_zero_at_reference_with_yaw_rate():
    ctl = make_controller()
    rate = 0.7
    f_vec = np.array([0.0, 0.0, MASS * 9.81])
    omega = np.array([0.0, 0.0, rate])  # already spinning at the desired rate
    cmd = ctl.attitude_thrust(f_vec, np.eye(3), omega, 0.0, rate)
    assert np.allclose(cmd.moment, 0.0, atol=1e-12)


def test_attitude_loop_closed_loop_convergence():
    # Rigid-body attitude simulation: 5 degree initial error must regulate to
    # |e_R| < 1e-3 within one second.
    ctl = make_controller()
    rot = so3_exp(np.deg2rad(5.0) * np.array([1.0, 0.0, 0.0]))
    omega = np.zeros(3)
    j = np.diag(INERTIA)
    jinv = np.linalg.inv(j)
    f_vec = np.array([0.0, 0.0, MASS * 9.81])
    dt = DT
    for _ in range(int(1.0 / dt)):
        cmd = ctl.attitude_thrust(f_vec, rot, omega, 0.0, 0.0)
        alpha = jinv @ (cmd.moment - np.cross(omega, j @ omega))
        omega = omega + alpha * dt
        rot = rot @ so3_exp(omega * dt)
    err = 0.5 * (rot.T @ np.eye(3) - np.eye(3) @ rot)
    e_r = np.array([err[2, 1], err[0, 2], err[1, 0]])
    assert np.linalg.norm(e_r) < 1e-3


def test_command_pipeline_hover():
    ctl = make_controller()
    mu = np.array([0.0, 0.0, 0.310 * 9.81 / 3.0])
    cmd = ctl.command(mu, np.array([0.0, 0.0, -1.0]), np.zeros(3), np.eye(3),
                      np.zeros(3), 9.81 * np.array([0, 0, 1.0]), DT)
    assert cmd.thrust == pytest.approx(MASS * 9.81 + 0.310 * 9.81 / 3.0, abs=1e-9)
    assert np.allclose(cmd.moment, 0.0, atol=1e-10)
