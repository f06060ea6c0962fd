import json

import numpy as np
import pytest

from cableteam.config import ConfigError, ScenarioConfig
from cableteam.report import (
    distances_brute_force,
    min_distances,
    summary,
    tracking_rms,
    wrench_rmse,
)
from cableteam.runner import ScenarioRunner, run_scenario
from cableteam.scenarios import human_approach, hover


def short_config(**over):
    base = {"simulation": {"duration": 1.0}}
    base.update(over)
    return ScenarioConfig.from_dict(base)


def test_rate_contract():
    cfg = short_config()
    assert cfg.sim_substeps == 2          # 2.5 ms control over 1.25 ms sim
    assert cfg.measurement_every == 4     # 100 Hz measurements at 400 Hz control
    assert cfg.steps == 400


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"payload_controller": {"kpp": [1, 1, 1]}})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"typo_section": {}})


def test_config_rejects_inconsistent_rates():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"simulation": {"sim_dt": 1e-3}})  # 2.5/1 not integer


def test_config_rejects_small_team():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"team": {"n": 2}})


def test_log_completeness_and_monotone_time():
    log = run_scenario(short_config())
    assert log.count == 400
    t = log.column("t")
    assert np.all(np.diff(t) > 0)
    assert t[0] == 0.0


def test_determinism_identical_logs(tmp_path):
    cfg = short_config(seed=11)
    a = run_scenario(cfg)
    b = run_scenario(ScenarioConfig.from_dict({"simulation": {"duration": 1.0},
                                               "seed": 11}))
    for key in a.data:
        assert np.array_equal(a.column(key), b.column(key), equal_nan=True), key
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    a.to_jsonl(pa)
    b.to_jsonl(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_different_seed_changes_noise():
    a = run_scenario(short_config(seed=1))
    b = run_scenario(short_config(seed=2))
    assert not np.array_equal(a.column("payload_pos"), b.column("payload_pos"))


def test_hover_regulation():
    log = run_scenario(hover(duration=4.0, seed=0))
    assert tracking_rms(log, start=2.0) < 0.02


def zero_noise_config(duration=2.0):
    # noise-free world paired with a noise-free filter: the closed loop then
    # sits exactly on the analytic equilibrium
    return ScenarioConfig.from_dict({
        "simulation": {"duration": duration},
        "noise": {"enabled": False},
        "ukf": {"sigma_thrust": 0.0, "sigma_tension": 0.0,
                "sigma_cable_dir": 0.0, "sigma_moment": 0.0,
                "sigma_omega": 0.0, "sigma_cable_rate": 0.0,
                "init_tension_var": 0.0, "init_cov_scale": 0.0},
    })


def test_zero_noise_hover_is_static_and_exact():
    log = run_scenario(zero_noise_config())
    drift = np.linalg.norm(log.column("payload_pos")[-1]
                           - log.column("payload_pos")[0])
    assert drift < 1e-9
    assert np.max(np.abs(log.column("est_wrench"))) < 1e-9
    assert wrench_rmse(log, start=0.5).max() < 1e-9


def test_injected_wrench_recorded_and_applied():
    cfg = short_config(seed=4)
    runner = ScenarioRunner(cfg)
    for _ in range(40):
        runner.step()
    runner.inject_wrench([0.3, 0.0, 0.0], [0.0, 0.0, 0.0], duration=0.5)
    for _ in range(40):
        runner.step()
    assert len(runner.log.events) == 1
    event = runner.log.events[0]
    assert event["kind"] == "apply_wrench"
    assert event["step"] == 40
    applied = runner.log.column("applied_wrench")
    assert np.all(applied[:40, 0] == 0.0)
    assert np.all(applied[40:80, 0] == 0.3)


def test_injected_wrench_expires():
    cfg = short_config(seed=4)
    runner = ScenarioRunner(cfg)
    runner.inject_wrench([0.3, 0.0, 0.0], [0.0, 0.0, 0.0], duration=0.1)
    for _ in range(80):
        runner.step()
    applied = runner.log.column("applied_wrench")
    assert np.all(applied[42:, 0] == 0.0)


def test_replay_from_event_log_matches_original():
    # an interactive session (command injected mid-run) replays identically
    # when the same command is applied at the same step
    def session(inject_at):
        runner = ScenarioRunner(short_config(seed=9))
        for i in range(200):
            if i == inject_at:
                runner.inject_wrench([0.2, 0.1, 0.0], [0.0, 0.0, 0.01], 0.3)
            runner.step()
        return runner.log

    a = session(50)
    replay_step = a.events[0]["step"]
    b_runner = ScenarioRunner(short_config(seed=9))
    for i in range(200):
        if i == replay_step:
            e = a.events[0]
            b_runner.inject_wrench(e["force"], e["moment"], e["duration"])
        b_runner.step()
    for key in a.data:
        assert np.array_equal(a.column(key), b_runner.log.column(key),
                              equal_nan=True), key


def test_gain_change_event_applies_at_boundary():
    runner = ScenarioRunner(short_config(seed=5))
    for _ in range(10):
        runner.step()
    runner.set_admittance_gains([0.5] * 6, [2.0] * 6, [0.0] * 6)
    assert runner.log.events[-1]["kind"] == "set_admittance_gains"
    assert np.all(runner.admittance.gains.mass == 0.5)


def test_safety_mode_change():
    runner = ScenarioRunner(short_config(seed=5))
    runner.set_safety_mode("gradient", human_radius=1.2)
    assert runner.allocator.params.mode == "gradient"
    assert runner.allocator.params.human_radius == 1.2
    runner.set_human_position([1.5, 0.0, 1.7])
    for _ in range(20):
        runner.step()
    assert np.isfinite(runner.log.column("min_human_dist")[:20]).all()


def test_reset_restores_initial_state():
    runner = ScenarioRunner(short_config(seed=5))
    for _ in range(100):
        runner.step()
    runner.reset(seed=5)
    assert runner.step_index == 0
    assert runner.t == 0.0
    frame = runner.step()
    assert frame.t == 0.0


def test_jsonl_and_csv_export(tmp_path):
    log = run_scenario(short_config(seed=3))
    jpath = tmp_path / "run.jsonl"
    cpath = tmp_path / "run.csv"
    log.to_jsonl(jpath)
    log.to_csv(cpath)
    lines = jpath.read_text().splitlines()
    header = json.loads(lines[0])
    assert header["schema"] == "cableteam-run/1"
    assert len(lines) == 1 + log.count
    row = json.loads(lines[1])
    assert set(row) == set(header["fields"])
    csv_lines = cpath.read_text().splitlines()
    assert len(csv_lines) == 1 + log.count


def test_report_distances_match_brute_force():
    log = run_scenario(ScenarioConfig.from_dict({
        "simulation": {"duration": 1.0},
        "script": {"human": {"start": [2.0, 0.0, 1.7], "end": [1.0, 0.0, 1.7],
                              "speed": 0.5, "start_time": 0.0}}}))
    bh, br = distances_brute_force(log)
    assert np.allclose(bh, log.column("min_human_dist"), atol=1e-12)
    assert np.allclose(br, log.column("min_robot_dist"), atol=1e-12)
    mh, mr = min_distances(log)
    assert mh == pytest.approx(bh.min())
    assert mr == pytest.approx(br.min())


def test_wrench_rmse_hand_computed():
    # three-sample arithmetic check of the RMSE formula
    log = run_scenario(short_config(seed=0))
    est = log.column("est_wrench")[800:803] if log.count > 803 else None
    sl_est = log.column("est_wrench")[-3:]
    sl_app = log.column("applied_wrench")[-3:]
    manual = np.sqrt(np.mean((sl_est - sl_app) ** 2, axis=0))
    # recompute through the reporting helper on a trimmed log
    from cableteam.runner import RunLog
    small = RunLog(3, log.n)
    for i in range(3):
        small.append({k: log.column(k)[log.count - 3 + i] for k in log.data})
    small.data["t"][:] = [0.0, 1.0, 2.0]
    assert np.allclose(wrench_rmse(small, start=0.0), manual, atol=1e-12)


def test_summary_fields():
    log = run_scenario(hover(duration=3.0, seed=0))
    data = summary(log)
    assert data["steps"] == log.count
    assert data["tracking_rms"] is not None
    assert json.dumps(data)  # serializable


def test_safety_modes_run_in_loop():
    for mode in ("gradient", "optimization"):
        cfg = human_approach(mode, duration=1.0)
        log = run_scenario(cfg)
        assert log.count == 400
        assert np.max(log.column("nullspace_residual")) < 1e-7
