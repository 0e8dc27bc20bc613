"""Compare the compiled and numpy kernel backends.

Times each per-step kernel on random inputs, then a full coarsening step
with each backend (in a subprocess, since the backend is fixed at import).

    python3 benchmarks/bench_kernels.py --grid 64 128 --repeat 200
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from chbflow import kernels
from chbflow.spectral import SpectralGrid


def kernel_inputs(n, seed=0):
    g = SpectralGrid(n)
    rng = np.random.default_rng(seed)

    def spec():
        return rng.normal(size=(n, g.m)) + 1j * rng.normal(size=(n, g.m))

    def real():
        return rng.normal(size=(n, n))

    a, fp, q1, q2 = spec(), spec(), spec(), spec()
    phi, u1, u2, gx, gy = (real() for _ in range(5))
    ph, mu, o1, o2, op = (np.empty((n, g.m), complex) for _ in range(5))
    cases = {
        "phase_modes": lambda k: k.phase_modes(a, fp, q1, q2, None, g.kx, g.ky, g.k2, g.mask_f,
                                               1.5, 1e-3, 1.0, 2.5e-3, 1.0, ph, mu),
        "brinkman_modes": lambda k: k.brinkman_modes(q1, q2, g.kx, g.ky, g.k2, 1.0, 1.0, o1, o2, op),
        "grad_sq_sum": lambda k: k.grad_sq_sum(a, g.kx, g.ky, g.colw),
        "strain_sq_sum": lambda k: k.strain_sq_sum(q1, q2, g.kx, g.ky, g.colw),
        "cubic_stab": lambda k: k.cubic_stab(phi, 1.0, np.empty_like(phi)),
        "double_well_sum": lambda k: k.double_well_sum(phi, 1.0),
        "flux_products": lambda k: k.flux_products(phi, u1, u2, gx, gy, np.empty((4, n, n))),
    }
    return cases


def bench_kernels(n, repeat):
    backends = {"python": kernels.load("python")}
    try:
        backends["cython"] = kernels.load("cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy backend only")
    print(f"\nkernels, n={n} (microseconds per call)")
    print(f"{'kernel':18s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in kernel_inputs(n).items():
        times = {b: min(timeit.repeat(lambda: fn(mod), number=repeat, repeat=3)) / repeat * 1e6
                 for b, mod in backends.items()}
        row = f"{name:18s}" + "".join(f"{times[b]:12.1f}" for b in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


STEP_SNIPPET = """
import time
from chbflow import kernels, stepper as stp
from chbflow.experiments import config, initial
from chbflow.spectral import SpectralGrid
cfg = config.preset("coarsening").with_overrides(grid={n})
g = SpectralGrid(cfg.grid)
p = cfg.physical_params()
h = stp.History(stp.state_from_phi(g, p, initial.initial_phi(cfg, g)))
s = stp.Stepper(g, p)
for k in (1, 2):
    h.accept(s.step(h, 1e-3, k))
t = time.perf_counter()
for _ in range({steps}):
    s.step(h, 1e-3, 2)
print(kernels.BACKEND, (time.perf_counter() - t) / {steps} * 1e3)
"""


def bench_steps(n, steps):
    print(f"\nfull order-2 step, n={n} (milliseconds per step)")
    for backend in ("python", "cython"):
        env = dict(os.environ, CHBFLOW_KERNELS=backend)
        proc = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(n=n, steps=steps)],
                              env=env, capture_output=True, text=True)
        if proc.returncode:
            print(f"{backend:8s} unavailable")
            continue
        used, ms = proc.stdout.split()
        print(f"{backend:8s} {float(ms):8.3f}" + ("" if used == backend else f"  (ran {used})"))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, nargs="+", default=[64, 128])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--steps", type=int, default=200)
    ns = ap.parse_args(argv)
    for n in ns.grid:
        bench_kernels(n, ns.repeat)
        bench_steps(n, ns.steps)


if __name__ == "__main__":
    main()
