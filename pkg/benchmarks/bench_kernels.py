"""Compare the numba kernels against the numpy fallback.

Each mode runs in its own interpreter because ``MORSECX_NO_NUMBA`` is read
at import time.  The compiled mode is warmed up once before timing so the
numbers exclude JIT compilation.

    python benchmarks/bench_kernels.py            # all cases
    python benchmarks/bench_kernels.py --repeat 5 --case hausdorff
"""
import argparse
import json
import os
import subprocess
import sys
import time

CASES = ("orbits", "variational", "tail", "hausdorff", "interp", "double_well")


def _case(name):
    import numpy as np

    from morsecx import expr as ex
    from morsecx.fields import field_from_nodes

    rng = np.random.default_rng(0)
    if name == "orbits":
        from morsecx.integrate import integrate_orbits

        F = field_from_nodes([ex.parse(s, 2) for s in ("x2", "-x1 + (1 - x1^2)*x2")])
        Y0 = rng.normal(size=(64, 2))
        return lambda: integrate_orbits(F, Y0, 20.0, rtol=1e-10, atol=1e-12)
    if name == "variational":
        from morsecx.integrate import variational_flow

        F = field_from_nodes([ex.parse(s, 2) for s in ("x2", "-sin(x1) - 0.1*x2")])
        return lambda: [variational_flow(F, np.array([0.4, -0.2]), 10.0) for _ in range(20)]
    if name == "tail":
        from morsecx.integrate import linear_tail

        A, K = rng.normal(size=(6, 6)), rng.normal(size=(6, 6))
        Y0 = rng.normal(size=(6, 3))
        return lambda: [linear_tail(A, K, -0.7, 0.0, Y0, 0.0, 3.0) for _ in range(20)]
    if name == "hausdorff":
        from morsecx.morse.broken import hausdorff

        s = np.linspace(0, 4 * np.pi, 400)
        A = np.column_stack([np.cos(s), np.sin(s), 0.1 * s])
        B = A + 0.01 * rng.normal(size=A.shape)
        return lambda: hausdorff(A, B, np.zeros(3))
    if name == "interp":
        from morsecx.local_dynamics import interp_multilinear

        values = rng.normal(size=(17, 17, 3))
        U = rng.uniform(-1, 1, size=(20000, 2))
        return lambda: interp_multilinear(-1.0, 2.0 / 16, 17, values, U)
    if name == "double_well":
        from morsecx.catalog import double_well
        from morsecx.morse.engine import analyze

        return lambda: analyze(double_well())
    raise ValueError(name)


def _worker(cases, repeat):
    from morsecx._accel import USE_NUMBA

    out = {"numba": USE_NUMBA}
    for name in cases:
        fn = _case(name)
        fn()  # warm-up, includes compilation
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    print(json.dumps(out))


def _run(cases, repeat, no_numba):
    env = dict(os.environ, MORSECX_NO_NUMBA="1" if no_numba else "0")
    cmd = [sys.executable, __file__, "--worker", "--repeat", str(repeat), "--case", *cases]
    r = subprocess.run(cmd, capture_output=True, text=True, env=env, check=True)
    return json.loads(r.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", nargs="+", default=list(CASES), choices=CASES)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        _worker(args.case, args.repeat)
        return
    fast = _run(args.case, args.repeat, no_numba=False)
    slow = _run(args.case, args.repeat, no_numba=True)
    print(f"{'case':<14}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for name in args.case:
        print(f"{name:<14}{fast[name]:>12.4f}{slow[name]:>12.4f}{slow[name] / fast[name]:>9.1f}x")


if __name__ == "__main__":
    main()
