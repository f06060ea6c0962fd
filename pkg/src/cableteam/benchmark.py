"""Timing benchmark for the allocation pipeline across team sizes."""
from __future__ import annotations

import json
import time

import numpy as np

from .allocation import (
    AllocationGeometry,
    SafetyAllocator,
    SafetyParams,
    build_p,
    distribute_min_norm,
)
from .sim import GRAVITY


def _geometry(n: int) -> AllocationGeometry:
    # attach points on a circle wide enough that neighboring robots clear the
    # pairwise constraint with vertical cables
    radius = max(0.5, 0.8 / (2.0 * np.sin(np.pi / n)))
    angles = 2.0 * np.pi * np.arange(n) / n
    rhos = np.column_stack([radius * np.cos(angles), radius * np.sin(angles),
                            np.zeros(n)])
    return AllocationGeometry.build(rhos, np.eye(3), np.zeros(3), np.ones(n))


def _median_time(fn, repetitions: int) -> float:
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def benchmark_allocators(sizes=(3, 6, 12, 24), repetitions: int = 30,
                         payload_mass: float = 0.31) -> dict:
    """Median per-call wall time of the allocation stages at each team size."""
    results = {"sizes": list(sizes), "distribute": [], "gradient": [],
               "optimize": [], "repetitions": repetitions}
    for n in sizes:
        geom = _geometry(n)
        p = build_p(geom)
        wrench = np.zeros(6)
        wrench[2] = payload_mass * GRAVITY
        mu_bar = distribute_min_norm(p, wrench)

        results["distribute"].append(
            _median_time(lambda: distribute_min_norm(p, wrench), repetitions))

        # object near enough to engage the gradient weighting
        p_obj = geom.attach_world[0] + np.array([0.6, 0.0, 1.0])

        grad_alloc = SafetyAllocator(SafetyParams(mode="gradient", gain=0.05,
                                                  decay=3.0))
        grad_alloc.allocate(wrench, geom, p_obj)  # prime persistent state
        results["gradient"].append(_median_time(
            lambda: grad_alloc._gradient_modifier(mu_bar, p, geom, p_obj),
            repetitions))

        # scaling is measured with inactive constraints so the per-call work
        # reflects problem dimension, not geometry-dependent active sets
        p_far = np.array([50.0, 0.0, 1.0])
        opt_alloc = SafetyAllocator(SafetyParams(mode="optimization",
                                                 human_radius=1.0,
                                                 robot_radius=0.75))
        opt_alloc.allocate(wrench, geom, p_far)  # warm start
        results["optimize"].append(_median_time(
            lambda: opt_alloc._optimize_modifier(mu_bar, p, geom, p_far),
            repetitions))
    return results


def write_benchmark(results: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")


def format_benchmark(results: dict) -> str:
    lines = [f"{'n':>4} {'distribute':>12} {'gradient':>12} {'optimize':>12}"]
    for i, n in enumerate(results["sizes"]):
        lines.append(
            f"{n:>4} {results['distribute'][i] * 1e6:>10.1f}us "
            f"{results['gradient'][i] * 1e6:>10.1f}us "
            f"{results['optimize'][i] * 1e6:>10.1f}us")
    return "\n".join(lines)
