"""Compare the compiled and numpy edge-flux kernels.

Times one kernel call and one full fractional step per backend on wet
random states, and checks the outputs agree bit for bit.  Speedups are
relative to the numpy kernel.

    python benchmarks/bench_kernels.py --cells 64 128 256 --workers 1 4
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pswe import kernels
from pswe.mesh import attach_ghosts, build_structured_mesh
from pswe.physics import FrictionParams
from pswe.scheme import extend
from pswe.state import FieldState, Terrain
from pswe.timestep import Model, StepPolicy, advance


def setup(cells: int, kind: str, seed: int = 0):
    rng = np.random.default_rng(seed)
    mesh = attach_ghosts(build_structured_mesh(kind, cells, cells, 1.0), "copy_owner")
    n = mesh.n_cells
    terrain = Terrain(rng.uniform(0, 0.2, n), rng.uniform(0.1, 1.0, n))
    state = FieldState(rng.uniform(0.5, 1.5, n), rng.normal(scale=0.3, size=(n, 2)))
    return mesh, terrain, state


def kernel_args(mesh, terrain, state, workers):
    ext = extend(state, mesh, terrain)
    return (mesh.edge_left, mesh.edge_right, mesh.edge_kind, mesh.edge_length,
            np.ascontiguousarray(mesh.edge_normal[:, 0]), np.ascontiguousarray(mesh.edge_normal[:, 1]),
            ext.vx, ext.vy, ext.th, ext.w, ext.c, 2, mesh.n_cells + mesh.n_ghosts, workers)


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--workers", type=int, nargs="+", default=[1, 4])
    ap.add_argument("--kind", choices=("rect", "hex"), default="rect")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = ["python"] + sorted(b for b in kernels.AVAILABLE if b != "python")
    print(f"backends: {backends}")
    print(f"{'cells':>6} {'backend':>8} {'workers':>7} {'kernel ms':>10} {'step ms':>9} {'speedup':>8} {'bitwise':>8}")
    for cells in args.cells:
        mesh, terrain, state = setup(cells, args.kind)
        model_args = dict(friction=FrictionParams(0.1, 0.01))
        base = None
        reference = kernels.AVAILABLE["python"](*kernel_args(mesh, terrain, state, 1))
        for name in backends:
            for workers in (args.workers if name != "python" else [1]):
                kargs = kernel_args(mesh, terrain, state, workers)
                fn = kernels.AVAILABLE[name]
                same = all(np.array_equal(a, b) for a, b in zip(fn(*kargs), reference))
                t_kernel = best_of(lambda: fn(*kargs), args.repeat)
                kernels.use_backend(name)
                model = Model(mesh, terrain, workers=workers, **model_args)
                policy = StepPolicy()
                t_step = best_of(lambda: advance(state, model, policy), args.repeat)
                if base is None:
                    base = t_kernel
                print(f"{cells:>6} {name:>8} {workers:>7} {1e3 * t_kernel:>10.3f} {1e3 * t_step:>9.3f} "
                      f"{base / t_kernel:>8.2f} {str(same):>8}")
    kernels.use_backend("cython" if "cython" in kernels.AVAILABLE else "python")


if __name__ == "__main__":
    main()
