"""Run-log metrics: tracking, wrench accuracy, distances, filter consistency."""
from __future__ import annotations

import json

import numpy as np
from scipy.stats import chi2

from .runner import RunLog


def _window(log: RunLog, start: float, stop: float | None = None) -> slice:
    t = log.column("t")
    i0 = int(np.searchsorted(t, start))
    i1 = len(t) if stop is None else int(np.searchsorted(t, stop))
    return slice(i0, i1)


def tracking_rms(log: RunLog, start: float = 2.0, stop: float | None = None) -> float:
    """RMS distance between payload position and the desired position."""
    sl = _window(log, start, stop)
    err = log.column("payload_pos")[sl] - log.column("des_pos")[sl]
    return float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))


def wrench_rmse(log: RunLog, start: float = 2.0) -> np.ndarray:
    """Per-axis RMSE of the estimated wrench against the applied wrench."""
    sl = _window(log, start)
    err = log.column("est_wrench")[sl] - log.column("applied_wrench")[sl]
    return np.sqrt(np.mean(err ** 2, axis=0))


def mean_velocity(log: RunLog, axis: int, start: float, stop: float) -> float:
    sl = _window(log, start, stop)
    return float(np.mean(log.column("payload_vel")[sl, axis]))


def mean_yaw_rate(log: RunLog, start: float, stop: float) -> float:
    sl = _window(log, start, stop)
    return float(np.mean(log.column("payload_omega")[sl, 2]))


def min_distances(log: RunLog) -> tuple[float, float]:
    return (float(np.min(log.column("min_human_dist"))),
            float(np.min(log.column("min_robot_dist"))))


def distances_brute_force(log: RunLog) -> tuple[np.ndarray, np.ndarray]:
    """Independent recomputation of the distance columns from raw positions."""
    quad = log.column("quad_pos")
    human = log.column("human_pos")
    steps, n, _ = quad.shape
    min_h = np.full(steps, np.inf)
    min_r = np.full(steps, np.inf)
    for i in range(steps):
        if np.all(np.isfinite(human[i])):
            min_h[i] = min(np.linalg.norm(quad[i, k] - human[i])
                           for k in range(n))
        min_r[i] = min(np.linalg.norm(quad[i, a] - quad[i, b])
                       for a in range(n) for b in range(a + 1, n))
    return min_h, min_r


def windowed_min_human_distance(log: RunLog, window: float = 1.0) -> np.ndarray:
    """Minimum human-robot distance per consecutive window."""
    d = log.column("min_human_dist")
    t = log.column("t")
    steps_per = max(1, int(round(window / (t[1] - t[0]))))
    count = len(d) // steps_per
    return np.array([d[i * steps_per:(i + 1) * steps_per].min()
                     for i in range(count)])


def nullspace_residual_max(log: RunLog) -> float:
    return float(np.max(log.column("nullspace_residual")))


def nees_band(samples: int, dof: int = 3, confidence: float = 0.95):
    """Two-sided chi-square band for the average NEES of ``samples`` draws."""
    lo = chi2.ppf((1.0 - confidence) / 2.0, dof * samples) / samples
    hi = chi2.ppf(1.0 - (1.0 - confidence) / 2.0, dof * samples) / samples
    return float(lo), float(hi)


def decay_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Exponential decay rate fitted on log|values| (positive = decaying)."""
    mask = np.abs(values) > 1e-12
    coeffs = np.polyfit(times[mask], np.log(np.abs(values[mask])), 1)
    return float(-coeffs[0])


def summary(log: RunLog) -> dict:
    """Headline numbers for a finished run, JSON-serializable."""
    min_h, min_r = min_distances(log)
    rmse = wrench_rmse(log)
    out = {
        "duration": float(log.column("t")[-1]) if log.count else 0.0,
        "steps": log.count,
        "tracking_rms": tracking_rms(log) if log.count > 800 else None,
        "wrench_rmse_force": rmse[:3].tolist(),
        "wrench_rmse_moment": rmse[3:].tolist(),
        "min_human_distance": None if np.isinf(min_h) else min_h,
        "min_robot_distance": None if np.isinf(min_r) else min_r,
        "max_nullspace_residual": nullspace_residual_max(log),
        "saturation_steps": int(np.sum(log.column("saturated"))),
        "stale_wrench_steps": int(np.sum(log.column("stale_wrench"))),
        "events": len(log.events),
    }
    return out


def write_summary(log: RunLog, path) -> dict:
    data = summary(log)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data
