"""Time the compiled and pure-Python kernels on the two hot loops.

    python3 benchmarks/bench_kernels.py [--n 64] [--repeat 3]

fv_step: one finite-volume update on the square room.
trace_many: evacuation-map paths from every INSIDE cell center.
"""

import argparse
import time

import numpy as np

from evacflow.hyperbolic import SpeedLaw, cfl_timestep, face_speeds, uniform_state
from evacflow.kernels import available_backends
from evacflow.library import builtin
from evacflow.trajectory import PathTracer
from evacflow.verification import solved


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=64, help="square room resolution")
    ap.add_argument("--paths", type=int, default=512, help="path starts for trace_many")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    g, _, f = solved(builtin("square_room", args.n))
    law = SpeedLaw()
    speeds = face_speeds(f, g)
    rho = np.ascontiguousarray(uniform_state(g, 0.5).rho)
    dt = cfl_timestep(None, f, law, 0.4, g)
    xs, ys = g.centers
    starts = np.column_stack([xs[g.inside], ys[g.inside]])[: args.paths]

    backends = available_backends()
    results = {}
    for name, k in backends.items():
        t_fv, out_fv = best_of(
            lambda: k.fv_step(rho, speeds.sx, speeds.sy, dt, g.hx, g.hy, *law.kernel_args()), args.repeat
        )
        tracer = PathTracer(f, g, backend=k)
        t_tr, out_tr = best_of(lambda: tracer.outcomes(starts), args.repeat)
        results[name] = (t_fv, t_tr, out_fv[0], out_tr)

    print(f"square room {args.n}x{args.n}, {len(starts)} paths, best of {args.repeat}")
    print(f"{'backend':<8} {'fv_step [ms]':>14} {'trace_many [ms]':>16}")
    for name, (t_fv, t_tr, _, _) in results.items():
        print(f"{name:<8} {1e3 * t_fv:>14.3f} {1e3 * t_tr:>16.2f}")
    if "cython" in results:
        py, cy = results["python"], results["cython"]
        print(f"speedup  {py[0] / cy[0]:>13.1f}x {py[1] / cy[1]:>15.1f}x")
        same = np.array_equal(py[2], cy[2]) and all(np.array_equal(a, b) for a, b in zip(py[3], cy[3]))
        print(f"outputs bit-identical: {same}")
    else:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
