"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--episodes K]

Prints per-call times for each kernel and the wall time of a short A3C run
under each backend (the run is started in a fresh interpreter so the
backend switch takes effect at import).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ptflab import _kernels_py as py_k
from ptflab.envs import load_env_spec

try:
    from ptflab import _kernels as cy_k
except ImportError:
    cy_k = None

RUN_SNIPPET = """
import time
from ptflab.agents import A3CConfig, A3CLearner
from ptflab.envs import load_env_spec, make_env
from ptflab import kernels
spec = load_env_spec("rooms12")
lr = A3CLearner(lambda: make_env(spec), A3CConfig(), 0)
t0 = time.perf_counter()
lr.run({episodes})
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def kernel_cases(rng):
    dims = np.array([10, 64, 64, 4], dtype=np.int64)
    flat = rng.normal(size=py_k.param_count(dims)) * 0.1
    x = rng.normal(size=10)
    X = rng.normal(size=(20, 10))
    grad = np.zeros_like(flat)
    d_out = rng.normal(size=(20, 4))
    m, v = np.zeros_like(flat), np.zeros_like(flat)
    spec = load_env_spec("pinball")
    edges = np.ascontiguousarray(spec.edges)

    def cases(k):
        acts = k.mlp_forward_batch(flat, dims, X)
        value = flat.copy()
        return {
            "mlp_forward (1 x 10 -> 64 -> 64 -> 4)": lambda: k.mlp_forward(flat, dims, x),
            "mlp_forward_batch (20 rows)": lambda: k.mlp_forward_batch(flat, dims, X),
            "mlp_backward_batch (20 rows)":
                lambda: k.mlp_backward_batch(flat, dims, acts, d_out, grad),
            "adam_update (%d params)" % flat.size:
                lambda: k.adam_update(value, grad, m, v, 1, 1e-4, 0.9, 0.999, 1e-8),
            "pinball_advance (20 substeps)":
                lambda: k.pinball_advance(0.1, 0.9, 0.7, -0.4, edges, spec.ball_radius,
                                          0.9, 0.1, 0.04, 20, spec.ball_radius),
        }
    return cases


def per_call(fn, repeat):
    n = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=n, repeat=repeat)) / n


def end_to_end(episodes, pure):
    env = dict(os.environ)
    if pure:
        env["PTFLAB_PURE_PYTHON"] = "1"
    else:
        env.pop("PTFLAB_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", RUN_SNIPPET.format(episodes=episodes)],
                         env=env, capture_output=True, text=True, check=True)
    backend, seconds = out.stdout.split()
    return backend, float(seconds)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--episodes", type=int, default=300)
    args = ap.parse_args()

    cases = kernel_cases(np.random.default_rng(0))
    py_cases = cases(py_k)
    cy_cases = cases(cy_k) if cy_k is not None else {}
    print(f"{'kernel':42s} {'numpy (us)':>12s} {'cython (us)':>12s} {'speedup':>8s}")
    for name, fn in py_cases.items():
        t_py = per_call(fn, args.repeat) * 1e6
        if name in cy_cases:
            t_cy = per_call(cy_cases[name], args.repeat) * 1e6
            print(f"{name:42s} {t_py:12.2f} {t_cy:12.2f} {t_py / t_cy:7.1f}x")
        else:
            print(f"{name:42s} {t_py:12.2f} {'n/a':>12s}")

    print(f"\nA3C, rooms12, {args.episodes} episodes, 8 workers (deterministic):")
    results = {}
    for pure in (True, False):
        backend, seconds = end_to_end(args.episodes, pure)
        results[backend] = seconds
        print(f"  {backend:8s} {seconds:8.2f} s")
    if len(results) == 2:
        print(f"  speedup  {results['python'] / results['cython']:8.1f}x")


if __name__ == "__main__":
    main()
