"""Compare the compiled and NumPy particle kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case advances ``n`` particles for a block of steps; results are checked
for bitwise equality before timing.
"""

import argparse
import math
import time

import numpy as np

from mvimpulse.kernels import backends

CASES = [(1, 4096), (16, 256), (1_000, 64), (10_000, 16)]


def _inputs(n, steps, rng):
    x = rng.uniform(0.5, 1.5, n)
    dB1 = rng.normal(0.0, 0.03, steps)
    dB2 = rng.normal(0.0, 0.03, (steps, n))
    jumps = rng.normal(0.0, 0.01, (steps, n))
    return x, dB1, dB2, jumps


def _run(mod, x, dB1, dB2, jumps):
    steps = dB1.size
    xx = x.copy()
    m_out = np.empty(steps)
    mod.advance(xx, 1e-3, 0.02, 0.2, 0.1, dB1, dB2, jumps, 0, steps, math.inf, 0, m_out)
    return xx, m_out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    mods = backends()
    rng = np.random.default_rng(0)
    print(f"{'n':>7} {'steps':>6} " + " ".join(f"{k + ' [us/step]':>18}" for k in mods) + "  speedup  equal")
    for n, steps in CASES:
        inputs = _inputs(n, steps, rng)
        outs = {k: _run(m, *inputs) for k, m in mods.items()}
        ref = next(iter(outs.values()))
        equal = all(np.array_equal(o[0], ref[0]) and np.array_equal(o[1], ref[1]) for o in outs.values())
        times = {}
        for k, m in mods.items():
            best = math.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                _run(m, *inputs)
                best = min(best, time.perf_counter() - t0)
            times[k] = 1e6 * best / steps
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{n:>7} {steps:>6} " + " ".join(f"{times[k]:>18.3f}" for k in mods)
              + f"  {speed:7.1f}  {equal}")


if __name__ == "__main__":
    main()
