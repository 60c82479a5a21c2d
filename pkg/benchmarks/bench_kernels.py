"""Compare the compiled and pure-Python inner-loop backends.

    python benchmarks/bench_kernels.py [--repeat N]

Prints per-call timings for each kernel on the three built-in field kinds,
the speed-up, and whether both backends returned bit-identical results.
"""

import argparse
import timeit

from interp_solve import kernels
from interp_solve.problems import forsaken_field, polar_game_field, quadratic_from_constants

CASES = [
    ("quadratic", quadratic_from_constants(1.0, -0.3), (1.0, 0.0), 0.7),
    ("polar", polar_game_field(), (1.0, 1.0), None),
    ("forsaken", forsaken_field(), (0.5, 0.5), None),
]


def _calls(problem, z0, gamma):
    kind, p = problem.field.kernel
    box = problem.box_tuple()
    g = gamma if gamma is not None else 1.0 / problem.lipschitz
    x, y = z0
    return {
        "la_inner(gda, tau=20)": lambda m: m.la_inner(kind, p, box, kernels.GDA, x, y, g, 0.5, 20),
        "la_inner(cegplus, tau=20)": lambda m: m.la_inner(kind, p, box, kernels.CEGPLUS, x, y, g, 0.1, 20),
        "prox_inner(tau=50)": lambda m: m.prox_inner(kind, p, box, x, y, g, 50, None),
        "prox_until(tol=1e-12)": lambda m: m.prox_until(kind, p, box, x, y, g, 1e-12, 100000),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    if kernels.compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    py, c = kernels.pure, kernels.compiled
    print(f"{'problem':<10} {'kernel':<26} {'python us':>10} {'compiled us':>12} {'speed-up':>9}  identical")
    for name, problem, z0, gamma in CASES:
        for label, fn in _calls(problem, z0, gamma).items():
            tp = min(timeit.repeat(lambda: fn(py), number=args.repeat // 10, repeat=3)) / (args.repeat // 10)
            tc = min(timeit.repeat(lambda: fn(c), number=args.repeat, repeat=3)) / args.repeat
            same = fn(py) == fn(c)
            print(f"{name:<10} {label:<26} {tp * 1e6:10.2f} {tc * 1e6:12.3f} {tp / tc:9.1f}  {same}")


if __name__ == "__main__":
    main()
