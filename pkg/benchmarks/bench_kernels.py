"""Compiled kernel vs the numpy fallback on the control search.

Runs the LQ control search (one Bellman layer) with both backends, checks
that they agree, and prints timings:

    python3 benchmarks/bench_kernels.py [--points 10000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from rlmc import kernels
from rlmc.basis import MonomialBasis
from rlmc.problems.lq import LqSpec, build_lq, discrete_lq_value


def inputs(points, seed=0):
    spec = LqSpec()
    model = build_lq(spec)
    g = model.gaussian
    x = np.random.default_rng(seed).uniform(-5, 5, points)
    P, Q, R = discrete_lq_value(spec)
    gamma = MonomialBasis(model.state_domain, 2).power_series(np.array([R[50], Q[50], P[50]]))
    mean0 = x * g.state_coef[0, 0] + g.drift[0]
    return (mean0, float(g.control_coef[0, 0]), float(g.sd[0]), -5.0, 5.0, gamma,
            1.0 / spec.N, 0.0, -1.0, -10.0, 10.0, 33, 2, 4)


def run(backend, args, points, threads=1):
    u = np.empty(points)
    obj = np.empty(points)
    t = time.perf_counter()
    backend.argmax_poly(*args, u, obj, threads)
    return time.perf_counter() - t, u, obj


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    args = inputs(a.points)
    print(f"active backend: {kernels.BACKEND}")
    results = {}
    backends = [("python", kernels.python_backend)]
    if kernels.BACKEND == "compiled":
        backends.insert(0, ("compiled", kernels))
    for name, backend in backends:
        times = []
        for _ in range(a.repeat):
            dt, u, obj = run(backend, args, a.points)
            times.append(dt)
        results[name] = (min(times), u, obj)
        print(f"{name:>9}: {min(times) * 1e3:9.2f} ms for {a.points} points")
    if len(results) == 2:
        (tc, uc, oc), (tp, up, op) = results["compiled"], results["python"]
        print(f"speed-up: {tp / tc:.1f}x")
        print(f"max |u diff| = {np.max(np.abs(uc - up)):.3g}, max |objective diff| = {np.max(np.abs(oc - op)):.3g}")


if __name__ == "__main__":
    main()
