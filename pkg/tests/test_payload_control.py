import numpy as np
import pytest

from cableteam.payload_control import (
    PayloadCommand,
    PayloadController,
    PayloadGains,
    PayloadReference,
    attitude_error,
)
from cableteam.sim import PayloadOdometry
from cableteam.so3 import euler_zyx_to_rot, so3_exp

RNG = np.random.default_rng(11)

INERTIA = np.array([0.039, 0.039, 0.0775])


def make_controller(**overrides):
    gains = dict(kp=np.full(3, 4.0), kd=np.full(3, 3.0), ki=np.full(3, 0.5),
                 kr=np.full(3, 1.0), komega=np.full(3, 0.3),
                 integral_clamp=np.full(3, 2.0))
    gains.update(overrides)
    return PayloadController(PayloadGains(**gains), 0.310, INERTIA)


def hover_odom(pos=(0.0, 0.0, 1.0)):
    return PayloadOdometry(np.asarray(pos, dtype=float), np.zeros(3),
                           np.eye(3), np.zeros(3))


def test_gravity_compensation_at_zero_error():
    ctl = make_controller()
    ref = PayloadReference.hover([0.0, 0.0, 1.0])
    cmd = ctl.desired_wrench(hover_odom(), ref, 0.0025)
    assert np.allclose(cmd.force, [0.0, 0.0, 0.310 * 9.81], atol=1e-12)
    assert cmd.force[2] == pytest.approx(3.0411, abs=1e-4)
    assert np.allclose(cmd.moment, 0.0, atol=1e-12)


def test_yaw_error_moment_direction():
    ctl = make_controller(kr=np.ones(3), komega=np.zeros(3))
    ref = PayloadReference.hover([0, 0, 1.0],
                                 euler_zyx_to_rot(np.array([np.pi / 2, 0, 0])))
    cmd = ctl.desired_wrench(hover_odom(), ref, 0.0025)
    assert np.allclose(attitude_error(np.eye(3), ref.rot), [0, 0, 1.0], atol=1e-12)
    assert np.allclose(cmd.moment, [0, 0, 1.0], atol=1e-12)


def test_attitude_error_zero_at_reference():
    for _ in range(20):
        r = so3_exp(RNG.normal(size=3))
        assert np.allclose(attitude_error(r, r), 0.0, atol=1e-15)


def test_position_error_gradient_matches_finite_difference():
    # d||e_x||^2 / d x_L = -2 e_x
    ref = PayloadReference.hover([0.2, -0.1, 1.3])
    for _ in range(20):
        x = RNG.normal(size=3)
        e = ref.pos - x
        grad = -2.0 * e
        h = 1e-6
        for i in range(3):
            dx = np.zeros(3)
            dx[i] = h
            fd = (np.sum((ref.pos - (x + dx)) ** 2)
                  - np.sum((ref.pos - (x - dx)) ** 2)) / (2 * h)
            assert abs(fd - grad[i]) < 1e-6


def test_zero_gains_zero_accel_gives_pure_gravity_term():
    ctl = make_controller(kp=np.zeros(3), kd=np.zeros(3), ki=np.zeros(3),
                          kr=np.zeros(3), komega=np.zeros(3))
    ref = PayloadReference.hover([5.0, 5.0, 5.0])  # large error, all gains zero
    odom = hover_odom([0.0, 0.0, 0.0])
    cmd = ctl.desired_wrench(odom, ref, 0.0025)
    assert np.allclose(cmd.force, [0.0, 0.0, 0.310 * 9.81])


def test_integral_term_bounded():
    ctl = make_controller()
    ref = PayloadReference.hover([10.0, 0.0, 1.0])  # persistent 10 m error
    odom = hover_odom()
    for _ in range(10_000):
        cmd = ctl.desired_wrench(odom, ref, 0.0025)
    # integral force contribution saturates at the clamp
    integral_force = cmd.force[0] - 0.310 * 4.0 * 10.0
    assert integral_force <= 2.0 + 1e-9


def test_omega_error_zero_at_reference():
    ctl = make_controller()
    rot = so3_exp(np.array([0.1, 0.2, -0.3]))
    omega = np.array([0.3, -0.2, 0.5])
    odom = PayloadOdometry(np.zeros(3), np.zeros(3), rot, omega)
    ref = PayloadReference(np.zeros(3), np.zeros(3), np.zeros(3), rot,
                           omega, np.zeros(3))
    cmd = ctl.desired_wrench(odom, ref, 0.0025)
    # e_R = 0, e_Omega = 0 -> moment is pure feedforward gyroscopic term
    expected = np.cross(omega, INERTIA * omega)
    assert np.allclose(cmd.moment, expected, atol=1e-12)


def test_reference_moment_feedforward_terms():
    ctl = make_controller(kr=np.zeros(3), komega=np.zeros(3))
    rot = np.eye(3)
    ref = PayloadReference(np.zeros(3), np.zeros(3), np.zeros(3), rot,
                           np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 2.0]))
    odom = PayloadOdometry(np.zeros(3), np.zeros(3), rot, np.zeros(3))
    cmd = ctl.desired_wrench(odom, ref, 0.0025)
    expected = INERTIA * ref.omega_dot + np.cross(ref.omega, INERTIA * ref.omega)
    assert np.allclose(cmd.moment, expected, atol=1e-12)


def test_rejects_nonpositive_dt():
    ctl = make_controller()
    with pytest.raises(ValueError):
        ctl.desired_wrench(hover_odom(), PayloadReference.hover([0, 0, 1]), 0.0)


def test_command_is_dataclass_with_consistent_accel():
    ctl = make_controller()
    ref = PayloadReference.hover([0.1, 0.0, 1.0])
    cmd = ctl.desired_wrench(hover_odom(), ref, 0.0025)
    assert isinstance(cmd, PayloadCommand)
    assert np.allclose(cmd.force, 0.310 * cmd.accel_cmd)
