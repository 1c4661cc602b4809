"""Compare the compiled and pure-Python kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--paths 20000] [--modes 8] [--steps 200] [--repeat 3]

Prints the best wall time of each backend for the normal generator and the
linear Euler-Maruyama loop, the speed-up, and the largest disagreement.
"""

import argparse
import time

import numpy as np

from hsl import kernels


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(paths, modes, steps, repeat):
    rng = np.random.default_rng(0)
    ids = np.arange(paths, dtype=np.int64)
    mux = -rng.uniform(0.1, 2.0, (steps, modes))
    cy = rng.standard_normal((steps, modes))
    sig = np.sqrt(rng.uniform(0.01, 1.0, modes))
    z0 = rng.standard_normal((paths, modes))
    h = 1.0 / steps

    backends = {"python": kernels.get_backend("python")}
    if kernels.compiled_available():
        backends["cython"] = kernels.get_backend("cython")
    else:
        print("compiled kernels not built; timing the fallback only")

    cases = {
        "counter_normals": lambda k: (lambda: k.counter_normals(7, ids, 3, modes)),
        "em_linear": lambda k: (lambda: k.em_linear(z0.copy(), mux, cy, sig, h, 7, ids, 1)),
    }
    print(f"paths={paths} modes={modes} steps={steps} repeat={repeat}")
    print(f"{'kernel':<16} {'backend':<8} {'seconds':>10} {'speed-up':>9} {'max rel diff':>13}")
    for name, make in cases.items():
        results = {b: best_time(make(k), repeat) for b, k in backends.items()}
        base_t, base_out = results["python"]
        for b, (t, out) in results.items():
            diff = np.max(np.abs(out - base_out) / np.maximum(np.abs(base_out), 1e-300))
            print(f"{name:<16} {b:<8} {t:>10.4f} {base_t / t:>8.1f}x {diff:>13.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--modes", type=int, default=8)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    bench(a.paths, a.modes, a.steps, a.repeat)


if __name__ == "__main__":
    main()
