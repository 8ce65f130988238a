"""Benchmark the compiled simulation kernels against the pure-numpy path.

Runs the same closed-loop workloads twice in subprocesses, once with
numba enabled and once with REGULATA_PURE_NUMPY=1, and prints wall-clock
times plus a cross-check that both paths produce identical trajectories.

Usage: python benchmarks/bench_kernels.py [--t-end 60] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, time
import numpy as np
import regulata as rg

t_end = float(os.environ["BENCH_T_END"])
repeat = int(os.environ["BENCH_REPEAT"])

rot = lambda w: [[0.0, w], [-w, 0.0]]
exo = rg.build_exosystem(rot(np.pi / 5), rot(1.0))
results = {"numba": rg.NUMBA_ENABLED, "cases": {}}

def time_case(name, fn):
    fn()  # warm-up (includes jit compilation when enabled)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    results["cases"][name] = {"best_s": min(times),
                              "checksum": float(out)}

# case 1: LTI propagator (Example-1 robot plant in closed loop)
lin = rg.from_registry("robot")
im1 = rg.internal_model(exo.S, n_y=1)
cfg = rg.ExperimentConfig(T=20, sample_dt=0.01, input_bound=0.5,
                          exo_init_bound=0.0025, noise_bound=0.01,
                          seed=0, mode="restarts", restart_radius=1.0)
ctrl1 = rg.synthesize_linear(rg.run_experiment(rg.augment(lin, im1), exo, cfg),
                             im1)

def lti_case():
    sr = rg.simulate_closed_loop(lin, ctrl1, exo, [1.0, 0.0],
                                 [0.5, 0.0, 0.5, 0.0], t_end=t_end, dt=1e-3)
    return np.sum(np.abs(sr.e))

time_case("lti_propagator", lti_case)

# case 2: ball-and-beam single system, 2nd-order internal model
bb = rg.from_registry("ball_beam")
im2 = rg.kth_order_internal_model(exo.S, 2, n_y=1)
cfg2 = rg.ExperimentConfig(T=50, sample_dt=0.002, input_bound=0.1,
                           exo_init_bound=0.005, noise_bound=0.002,
                           seed=1, mode="restarts", restart_radius=0.1)
ctrl2 = rg.synthesize_nonlinear_k(
    rg.run_experiment(rg.augment(bb, im2), exo, cfg2), exo.S, 2)

def bb_case():
    sr = rg.simulate_closed_loop(bb, ctrl2, exo, [0.005, 0.0, 0.0, 0.0],
                                 [0.003, 0.0, 0.003, 0.0],
                                 t_end=t_end, dt=1e-3)
    return np.sum(np.abs(sr.e))

time_case("ball_beam_rk4", bb_case)

# case 3: four-agent ball-and-beam fleet
plants = rg.from_registry("ball_beam_fleet")
g = rg.chain_graph(len(plants))
seeds = np.random.SeedSequence(0).spawn(len(plants))
datasets = []
for i, p in enumerate(plants):
    c = rg.ExperimentConfig(T=100, sample_dt=0.002, input_bound=0.1,
                            exo_init_bound=0.002, noise_bound=0.002,
                            mode="restarts", restart_radius=0.1,
                            seed=seeds[i].generate_state(1)[0])
    datasets.append(rg.run_experiment(rg.augment(p, im2), exo, c))
fc = rg.synthesize_fleet(datasets, g, im2)

def fleet_case():
    sr = rg.simulate_fleet(plants, fc, exo, g,
                           [np.array([0.005, 0.0, 0.0, 0.0])] * 4,
                           np.array([0.0012, 0.0, 0.0012, 0.0]),
                           t_end=t_end, dt=1e-3)
    return np.sum(np.abs(sr.e))

time_case("ball_beam_fleet_rk4", fleet_case)

print(json.dumps(results))
"""


def run_mode(pure, t_end, repeat):
    env = dict(os.environ,
               BENCH_T_END=str(t_end), BENCH_REPEAT=str(repeat),
               REGULATA_PURE_NUMPY="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", WORKER], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=60.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    compiled = run_mode(False, args.t_end, args.repeat)
    pure = run_mode(True, args.t_end, args.repeat)
    if not compiled["numba"]:
        print("warning: numba unavailable, comparing pure-numpy to itself")

    print(f"{'case':24s} {'numba [s]':>10s} {'numpy [s]':>10s} "
          f"{'speedup':>8s}  match")
    for name, c in compiled["cases"].items():
        p = pure["cases"][name]
        match = abs(c["checksum"] - p["checksum"]) <= 1e-9 * max(
            1.0, abs(c["checksum"]))
        print(f"{name:24s} {c['best_s']:10.4f} {p['best_s']:10.4f} "
              f"{p['best_s'] / max(c['best_s'], 1e-12):7.1f}x  "
              f"{'yes' if match else 'NO'}")


if __name__ == "__main__":
    main()
