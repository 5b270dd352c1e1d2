"""Compare the jit-compiled and pure-numpy kernel backends.

Times the hot paths (right-hand side evaluation, pose reconstruction, the
fixed-step integrator, and a short damped adaptive run) on both backends
and prints a side-by-side table.  The jit backend pays a one-off compile
cost on first use; a warmup pass runs before anything is timed.

    python benchmarks/bench_backends.py [--nodes 21 81] [--repeat 200]
"""

import argparse
import time

import numpy as np

from rodobs import backend
from rodobs.discretization import (
    Grid,
    RodState,
    SolverConfig,
    reconstruct_poses,
    rhs_dynamics,
    simulate,
    step,
)
from rodobs.rod_model import ExternalLoad, RodModel, proportional_damping, section_stiffness


def bent_state(grid):
    state = RodState.straight(grid)
    state.strain[:, 2] += 0.4 * np.sin(np.pi * grid.s / grid.length)
    state.velocity[1:, 4] = 0.05
    return state


def time_call(fn, repeat):
    fn()  # warmup (trigger any compile)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_backend(name, nodes, repeat):
    backend.use(name)
    model = RodModel.build()
    damping = proportional_damping(section_stiffness(model.geometry), 1e-3)
    damped = RodModel.build(load=ExternalLoad(damping=tuple(map(tuple, damping))))
    rows = {}
    for n in nodes:
        grid = Grid(n_nodes=n, length=model.geometry.length)
        state = bent_state(grid)
        rows[f"rhs eval (N={n})"] = time_call(
            lambda: rhs_dynamics(state, model, grid), repeat
        )
        rows[f"pose reconstruction (N={n})"] = time_call(
            lambda: reconstruct_poses(state.strain, grid), repeat
        )
    grid = Grid(n_nodes=nodes[0], length=model.geometry.length)
    state = bent_state(grid)
    cfg = SolverConfig(kind="fixed", fixed_dt=1e-4)
    t0 = time.perf_counter()
    step(state, model, grid, cfg, 0.05)
    rows[f"fixed-step, 500 steps (N={nodes[0]})"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    simulate(bent_state(grid), damped, grid, 0.0, 0.25, SolverConfig())
    rows[f"adaptive damped, 0.25 s (N={nodes[0]})"] = time.perf_counter() - t0
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, nargs="+", default=[21, 81])
    parser.add_argument("--repeat", type=int, default=200,
                        help="repetitions for the per-call timings")
    args = parser.parse_args(argv)

    results = {}
    for name in ("numpy", "numba"):
        try:
            results[name] = bench_backend(name, args.nodes, args.repeat)
        except ImportError as exc:
            print(f"skipping backend {name!r}: {exc}")
    if "numpy" not in results or "numba" not in results:
        for name, rows in results.items():
            print(f"\nbackend {name}:")
            for label, seconds in rows.items():
                print(f"  {label:<38} {seconds * 1e3:9.3f} ms")
        return 0

    labels = list(results["numpy"])
    width = max(len(label) for label in labels)
    print(f"{'':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for label in labels:
        a = results["numpy"][label]
        b = results["numba"][label]
        print(f"{label:<{width}}  {a * 1e3:9.3f}ms  {b * 1e3:9.3f}ms  {a / b:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
