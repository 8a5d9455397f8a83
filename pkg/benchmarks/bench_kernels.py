"""Time the numba and numpy backends on the solver's hot loops.

    python3 benchmarks/bench_kernels.py [--n 65] [--repeat 5]

Reports the best wall time per call for the residual, one lexicographic
Gauss-Seidel sweep, one four-colour sweep and a full W(1,1)-cycle.
"""

import argparse
import time

import numpy as np

from tetralfa import assemble_stencil, basis_from_tet, shape_catalog
from tetralfa.solver import CycleConfig, GridLevel, Hierarchy, available_backends, get_backend, relax
from tetralfa.symbols import SmootherConfig


def best_of(fn, repeat):
    fn()  # warm-up (triggers compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(backend, n, repeat):
    basis = basis_from_tet(shape_catalog("regular"))
    level = GridLevel(n, assemble_stencil(basis))
    kern = get_backend(backend)
    rng = np.random.default_rng(0)
    u = level.zeros()
    u[1:-1, 1:-1, 1:-1] = rng.uniform(-1, 1, (n - 2,) * 3)
    f = level.zeros()
    out = level.zeros()
    st = level.stencil
    gs = SmootherConfig("gs_lex", (1.0,))
    four = SmootherConfig("four_color", (1.0,))
    hier = Hierarchy(basis, n, backend=kern)
    cfg = CycleConfig(four, 1, 1, "W")
    return {
        "residual": best_of(lambda: kern.residual(u, f, st.center, level._offs, level._coeffs, out),
                            repeat),
        "gs_lex sweep": best_of(lambda: relax(level, u, f, gs, 1, kern), repeat),
        "four_color sweep": best_of(lambda: relax(level, u, f, four, 1, kern), repeat),
        "W(1,1) cycle": best_of(lambda: hier.cycle(u, f, cfg), max(1, repeat // 2)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=65)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    results = {b: bench(b, args.n, args.repeat) for b in available_backends()}
    names = list(next(iter(results.values())))
    print(f"n = {args.n}, best of {args.repeat}, seconds per call")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in results) + (
        f"{'speedup':>10}" if len(results) == 2 else ""))
    for name in names:
        row = f"{name:<18}" + "".join(f"{results[b][name]:>12.4f}" for b in results)
        if len(results) == 2:
            row += f"{results['numpy'][name] / results['numba'][name]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
