#!/usr/bin/env python3
"""Benchmark the hot kernels under the compiled and fallback paths.

Run `python benchmarks/bench_kernels.py`: the script times the numba-compiled
kernels in-process, re-executes itself with EPIDELAY_NO_NUMBA=1 to time the
fallback paths, and prints a comparison. The network day sweep additionally
compares its two in-process implementations (loop kernel vs vectorized
numpy), which consume identical random variates and must agree bit for bit.
"""

import hashlib
import math
import os
import subprocess
import sys
import time

import numpy as np

from epidelay._accel import USE_NUMBA
from epidelay.dde import constant_history, integrate_reduced
from epidelay.graphs import generate_graph
from epidelay.netsim import (
    infection_prob_table,
    init_state,
    run_single,
    seed_infections,
    _day_sweep_loop,
    _day_sweep_numpy,
)
from epidelay.params import DegreeStats, EpidemicParams

NET_NODES = 100_000
NET_DAYS = 30


def checksum(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:12]


def bench_net_sweep(sweep) -> tuple[float, str]:
    graph = generate_graph("config-poisson", NET_NODES, 4.0, 1)
    params = EpidemicParams(rho=0.2, gamma=0.1, alpha=0.3, t_delay=2.0)
    p_table = infection_prob_table(params.rho, int(graph.degrees.max()))
    p_rec = -math.expm1(-params.gamma)
    rng = np.random.default_rng(0)
    seeds = seed_infections(graph, 10, "degree", rng)
    state = init_state(graph, seeds, params, rng)
    counts = np.zeros(graph.node_count, dtype=np.int64)
    # draw all variates up front so only the sweep is timed
    variates = [(rng.random(graph.node_count), rng.random(graph.node_count),
                 rng.random(graph.node_count)) for _ in range(NET_DAYS)]
    sweep(graph.indptr, graph.indices, state.status.copy(), state.iso_day.copy(),
          state.inf_day.copy(), 1, p_table, p_rec, params.alpha, 2,
          *variates[0], counts)  # warm-up / jit
    status = state.status.copy()
    iso_day = state.iso_day.copy()
    inf_day = state.inf_day.copy()
    t0 = time.perf_counter()
    for day, (u_inf, u_rec, u_iso) in enumerate(variates, start=1):
        sweep(graph.indptr, graph.indices, status, iso_day, inf_day, day,
              p_table, p_rec, params.alpha, 2, u_inf, u_rec, u_iso, counts)
    elapsed = time.perf_counter() - t0
    return elapsed, checksum(status)


def bench_dde() -> tuple[float, str]:
    params = EpidemicParams(rho=0.075, gamma=0.1, alpha=0.8, t_delay=0.5)
    stats = DegreeStats.from_mu_cv(4.0, 0.5)
    hist = constant_history([1e-5, 0.375e-5])
    integrate_reduced(params, stats, hist, 2.0, 0.01)  # warm-up / jit
    t0 = time.perf_counter()
    traj = integrate_reduced(params, stats, hist, 100.0, 0.01)
    elapsed = time.perf_counter() - t0
    return elapsed, checksum(traj.states)


def run_suite() -> dict[str, tuple[float, str]]:
    mode = "numba" if USE_NUMBA else "numpy"
    results = {}
    t, c = bench_net_sweep(_day_sweep_loop if USE_NUMBA else _day_sweep_numpy)
    results[f"net_sweep_{mode}"] = (t, c)
    t, c = bench_dde()
    results[f"dde_reduced_{mode}"] = (t, c)
    return results


def main() -> int:
    results = run_suite()
    if USE_NUMBA:
        # in-process cross-check of the two day-sweep implementations
        t_np, c_np = bench_net_sweep(_day_sweep_numpy)
        results["net_sweep_numpy"] = (t_np, c_np)
        env = dict(os.environ, EPIDELAY_NO_NUMBA="1")
        child = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--child"],
            env=env, capture_output=True, text=True, check=True,
        )
        for line in child.stdout.splitlines():
            if line.startswith("RESULT "):
                _, name, secs, csum = line.split()
                results[name] = (float(secs), csum)
    for name, (secs, csum) in sorted(results.items()):
        print(f"RESULT {name} {secs:.4f} {csum}")
    if USE_NUMBA:
        print()
        for bench in ("net_sweep", "dde_reduced"):
            fast = results[f"{bench}_numba"]
            slow = results[f"{bench}_numpy"]
            same = "bit-identical" if fast[1] == slow[1] else "OUTPUTS DIFFER"
            print(f"{bench}: numba {fast[0]*1e3:.1f} ms vs fallback {slow[0]*1e3:.1f} ms "
                  f"-> {slow[0]/fast[0]:.1f}x speedup, {same}")
    else:
        print("(numba disabled; run without EPIDELAY_NO_NUMBA for the comparison)")
    return 0


if __name__ == "__main__":
    if "--child" in sys.argv:
        for name, (secs, csum) in run_suite().items():
            print(f"RESULT {name} {secs:.4f} {csum}")
        sys.exit(0)
    sys.exit(main())
