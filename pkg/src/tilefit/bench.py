"""Benchmark the kernel backends against each other.

Two regimes matter: one big network over the whole signal (BLAS-bound,
backends should tie) and many tiny per-cell networks (call-overhead
bound, where the compiled backend earns its keep).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .kernels import ACT_SINE
from .nets import SubNetworkConfig, init_subnetwork


@dataclass
class BenchResult:
    scenario: str
    backend: str
    steps_per_sec: float
    seconds: float


_SCENARIOS = {
    # name: (depth, width, batch, cells, steps)
    "single-large-net": (3, 256, 4096, 1, 20),
    "tiled-64-sample-cells": (1, 128, 64, 64, 60),
    "tiled-16-sample-cells": (1, 128, 16, 256, 60),
    "tiled-4-sample-cells": (1, 128, 4, 1024, 60),
}


def _run_one(backend, depth, width, batch, cells, steps) -> float:
    be = kernels.get_backend(backend)
    rng = np.random.default_rng(0)
    config = SubNetworkConfig(depth_d=depth, width_w=width)
    elapsed = 0.0
    for cell in range(cells):
        net = init_subnetwork(config, 2, 3, cell, dtype=np.float32)
        x = rng.uniform(-1, 1, (batch, 2)).astype(np.float32)
        t = rng.uniform(-1, 1, (batch, 3)).astype(np.float32)
        m = np.zeros_like(net.theta)
        v = np.zeros_like(net.theta)
        losses = np.empty(steps)
        t0 = time.perf_counter()
        be.train_steps(net.theta, m, v, 0, net.dims, ACT_SINE, 30.0, x, t,
                       steps, 1e-4, 0.9, 0.999, 1e-8, losses)
        elapsed += time.perf_counter() - t0
    return elapsed


def run_benchmarks(backends=None, scenarios=None, repeats: int = 3) -> list[BenchResult]:
    """Time every scenario on every built backend; best of ``repeats``."""
    if backends is None:
        backends = kernels.available_backends()
    names = scenarios or list(_SCENARIOS)
    results = []
    for scenario in names:
        depth, width, batch, cells, steps = _SCENARIOS[scenario]
        for backend in backends:
            best = min(_run_one(backend, depth, width, batch, cells, steps)
                       for _ in range(repeats))
            results.append(BenchResult(scenario, backend,
                                       steps_per_sec=cells * steps / best, seconds=best))
    return results


def format_results(results) -> str:
    lines = [f"{'scenario':<26} {'backend':<8} {'cell-steps/s':>14} {'seconds':>10}"]
    for r in results:
        lines.append(f"{r.scenario:<26} {r.backend:<8} {r.steps_per_sec:>14.0f} {r.seconds:>10.4f}")
    by_scenario = {}
    for r in results:
        by_scenario.setdefault(r.scenario, {})[r.backend] = r.seconds
    for scenario, times in by_scenario.items():
        if "cython" in times and "python" in times:
            lines.append(
                f"{scenario}: cython is {times['python'] / times['cython']:.1f}x "
                f"the python backend"
            )
    return "\n".join(lines)
