"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Also times an end-to-end M = 16 SOCP solve and one short simulation under
each backend (the fallback is forced in a subprocess with CIDP_PURE_PYTHON=1).
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from cidp import _kernels_py
from cidp.sltm_optimizer import make_problem

try:
    from cidp import _kernels as _cy
except ImportError:
    _cy = None


def kernel_cases():
    rng = np.random.default_rng(0)
    n, F, L = 16, 16, 120
    Q = rng.integers(0, 50, (n, F)).astype(np.int64)
    li = rng.integers(0, n, L).astype(np.int64)
    lj = ((li + 1 + rng.integers(0, n - 1, L)) % n).astype(np.int64)
    el = np.ones(F, dtype=bool)
    p = make_problem(16)
    s = np.full(16, 0.9)
    eta = 2.0 * float(np.max(np.hypot(p.R @ s, p.I @ s)))
    v = rng.uniform(0, 8, 6)
    return {
        "link_argmax": lambda k: k.link_argmax(Q, li, lj, el),
        "soc_barrier": lambda k: k.soc_barrier(p.R, p.I, s, eta),
        "racbf_hops": lambda k: k.racbf_hops(v, 6.0, 30.0, 0.5, 0.0),
    }


_E2E = """
import json, time
from cidp import kernels
from cidp.core_model import load_paper_scenario
from cidp.sltm_optimizer import make_problem, solve_socp
from cidp.sim_engine import run
p = make_problem(16); solve_socp(p)
t = time.perf_counter()
for _ in range(20):
    solve_socp(p)
socp = (time.perf_counter() - t) / 20
cfg = load_paper_scenario().replace(sim__n_slots=500)
t = time.perf_counter(); run(cfg, "cidp", 0, record_trace=False); sim = time.perf_counter() - t
print(json.dumps({"backend": kernels.BACKEND, "socp_m16_ms": socp * 1e3, "sim_500_slots_s": sim}))
"""


def end_to_end(pure: bool):
    env = dict(os.environ)
    if pure:
        env["CIDP_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    a = ap.parse_args()
    print(f"{'kernel':<14}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for name, fn in kernel_cases().items():
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=a.repeat, repeat=3)) / a.repeat * 1e6
        if _cy is None:
            print(f"{name:<14}{tp:12.2f}{'n/a':>12}")
            continue
        tc = min(timeit.repeat(lambda: fn(_cy), number=a.repeat, repeat=3)) / a.repeat * 1e6
        print(f"{name:<14}{tp:12.2f}{tc:12.2f}{tp / tc:10.1f}x")
    for pure in (False, True):
        print(end_to_end(pure))


if __name__ == "__main__":
    main()
