"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times each hot kernel on a harness-sized batch (1000 impressions, 3 pages)
and one full 14000-step run of all four agents under each backend.
"""

from __future__ import annotations

import argparse
import subprocess
import sys
import timeit

import numpy as np

from flowbandits import kernels
from flowbandits.features import ContextSchema, FlowShape, encoding_table, standard_forms

FULL_RUN = """
import sys, time
if sys.argv[1] == "python":
    sys.modules["flowbandits._kernels"] = None
from flowbandits import kernels
from flowbandits.harness import ExperimentConfig, simulate_run
assert kernels.BACKEND == sys.argv[1], kernels.BACKEND
cfg = ExperimentConfig(runs=1, seed=0)
start = time.perf_counter()
simulate_run(cfg, 0)
print(time.perf_counter() - start)
"""


def blip_inputs(n=1000):
    form = standard_forms("mdp", FlowShape.uniform(3, 3), ContextSchema("categorical", 3))[1]
    table = encoding_table(form)
    rng = np.random.default_rng(0)
    X = table[rng.integers(3, size=n), rng.integers(3, size=n), rng.integers(3, size=n)]
    y = rng.choice([-1.0, 1.0], n)
    return X, y, form


def q_inputs(n=3000):
    rng = np.random.default_rng(0)
    feas = np.ones((3, 4, 3), dtype=bool)
    page = rng.integers(3, size=n)
    reward = (rng.random(n) < 0.1).astype(float)
    return (feas, page, np.where(page == 0, 0, rng.integers(1, 4, size=n)), rng.integers(3, size=n),
            rng.integers(3, size=n), reward, (reward == 1) | (page == 2), 0.05, 1.0)


def time_kernel(fn, setup, repeat):
    return min(timeit.repeat(lambda: fn(*setup()), number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = {"python": kernels.fallback}
    if kernels.compiled is not None:
        backends["cython"] = kernels.compiled
    else:
        print("compiled extension not built; only the fallback is timed")

    X, y, form = blip_inputs()
    d = len(form.layout)
    qargs = q_inputs()
    rows = []
    for name, impl in backends.items():
        t_blip = time_kernel(impl.blip_fold, lambda: (np.zeros(d), np.ones(d), X, y, 1.0), args.repeat)
        t_q = time_kernel(impl.q_fold, lambda: (np.zeros((3, 4, 3, 3)), *qargs), args.repeat)
        proc = subprocess.run([sys.executable, "-c", FULL_RUN, name], capture_output=True, text=True, check=True)
        rows.append((name, t_blip, t_q, float(proc.stdout)))

    print(f"{'backend':8s} {'blip_fold 1000x' + str(d):>18s} {'q_fold 3000':>12s} {'full run':>10s}")
    for name, a, b, c in rows:
        print(f"{name:8s} {a * 1e3:15.2f} ms {b * 1e3:9.2f} ms {c:8.2f} s")
    if len(rows) == 2:
        (_, pa, pb, pc), (_, ca, cb, cc) = rows
        print(f"speed-up  {pa / ca:15.1f} x  {pb / cb:9.1f} x  {pc / cc:8.1f} x")


if __name__ == "__main__":
    main()
