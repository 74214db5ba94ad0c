"""Compare the compiled and pure-numpy kernel backends.

Times each kernel on arrays of one block size, then an end-to-end ensemble
run per geometry with the backend forced through ``BUNDLEHEAT_BACKEND``.

    python3 benchmarks/bench_backends.py [--paths 16384] [--steps 200]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from bundleheat import _pykernels, kernels

END_TO_END = """
import json, sys, time
from bundleheat import kernels
from bundleheat.bundles import forms_bundle
from bundleheat.geometry import make_geometry
from bundleheat.sde import StepConfig, run_ensemble
geom = make_geometry(sys.argv[1])
x0 = geom.sample_boundary(__import__("numpy").random.default_rng(0), 1)[0]
b = forms_bundle(geom, 1)
cfg = StepConfig(dt=1e-3, seed=1)
t0 = time.perf_counter()
res = run_ensemble(x0, float(sys.argv[3]) * 1e-3, geom, b, cfg, n_paths=int(sys.argv[2]))
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0,
                  "lam": float(res.batch.lam.mean())}))
"""


def kernel_inputs(n, rng):
    x = rng.standard_normal((n, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    E = _pykernels._orthonormalize(x, rng.standard_normal((n, 3, 2)))
    return {
        "reflect_1d": (rng.uniform(0, 0.05, n), rng.standard_normal(n) * 0.03, 1.0 - rng.random(n), 1e-3, True),
        "sphere_step": (x, E, rng.standard_normal((n, 2)) * 0.03),
        "bin_accumulate": (rng.integers(-1, 4096, n), rng.standard_normal((n, 4)), 4096),
    }


def time_kernels(n, repeat=5):
    rng = np.random.default_rng(0)
    inputs = kernel_inputs(n, rng)
    rows = []
    for name, args in inputs.items():
        row = {"kernel": name}
        for backend, mod in kernels.BACKENDS.items():
            fn = getattr(mod, name)
            row[backend] = min(timeit.repeat(lambda: fn(*args), number=10, repeat=repeat)) / 10
        rows.append(row)
    return rows


def time_end_to_end(paths, steps):
    rows = []
    for geom in ("half_space", "disk_exterior", "hemisphere"):
        row = {"geometry": geom}
        for backend in kernels.BACKENDS:
            env = dict(os.environ, BUNDLEHEAT_BACKEND=backend)
            out = subprocess.run([sys.executable, "-c", END_TO_END, geom, str(paths), str(steps)], env=env,
                                 capture_output=True, text=True, check=True)
            res = json.loads(out.stdout)
            row[backend] = res["seconds"]
            row[f"lam_{backend}"] = res["lam"]
        rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=16384)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args(argv)
    names = list(kernels.BACKENDS)
    print(f"backends available: {names} (active: {kernels.BACKEND})")
    print(f"\nkernels on {args.paths} paths (ms per call)")
    print(f"{'kernel':16s}" + "".join(f"{b:>10s}" for b in names) + ("   speedup" if len(names) > 1 else ""))
    for row in time_kernels(args.paths):
        line = f"{row['kernel']:16s}" + "".join(f"{1e3 * row[b]:10.3f}" for b in names)
        if "cython" in row:
            line += f"{row['python'] / row['cython']:9.1f}x"
        print(line)
    print(f"\nforms:1 ensemble, {args.paths} paths x {args.steps} steps from the boundary (s)")
    print(f"{'geometry':16s}" + "".join(f"{b:>10s}" for b in names) + "   same E[lam]")
    for row in time_end_to_end(args.paths, args.steps):
        same = len({round(row[f'lam_{b}'], 12) for b in names}) == 1
        print(f"{row['geometry']:16s}" + "".join(f"{row[b]:10.2f}" for b in names) + f"   {same}")


if __name__ == "__main__":
    main()
