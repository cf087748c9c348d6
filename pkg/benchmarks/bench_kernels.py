"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from symctl import _kernels_py, kernels
from symctl.poly import Polynomial

# a damped Duffing-like oscillator plus a quartic coupling, in R^3
FIELD = Polynomial(3, [
    {(0, 1, 0): 1.0},
    {(1, 0, 0): -1.0, (0, 1, 0): -0.1, (3, 0, 0): -0.2, (0, 0, 1): 0.3},
    {(1, 1, 0): 0.05, (0, 0, 1): -0.5, (2, 0, 2): -0.01},
])
EMPTY = (np.zeros(0), np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64), 0)
X0 = np.array([0.4, -0.2, 0.1])


def cases():
    field = FIELD.arrays() + (FIELD.nout,)
    out = np.zeros(3)
    coef, exps, rows = FIELD.arrays()

    def evals(impl):
        for _ in range(2000):
            impl.poly_eval(coef, exps, rows, X0, out)

    def adaptive(impl):
        impl.integrate_poly(field, EMPTY, EMPTY, X0, 20.0, kernels.DOPRI45, 1e-3,
                            1e-10, 1e-12, 1e-8, 1e12, 10**7)

    def fixed(impl):
        impl.integrate_poly(field, EMPTY, EMPTY, X0, 2.0, kernels.RK4, 1e-3,
                            1e-10, 1e-12, 1e-8, 1e12, 10**7)

    return [("poly_eval x2000", evals), ("DOPRI45 to t=20", adaptive), ("RK4 2000 steps", fixed)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = [("python", _kernels_py)]
    if kernels.compiled_available():
        from symctl import _kernels
        impls.insert(0, ("compiled", _kernels))
    else:
        print("compiled kernels not built; timing the fallback only")
    print(f"{'case':<20}" + "".join(f"{name:>14}" for name, _ in impls) + ("   speedup" if len(impls) == 2 else ""))
    for label, fn in cases():
        best = [min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)) for _, impl in impls]
        row = f"{label:<20}" + "".join(f"{t * 1e3:>11.2f} ms" for t in best)
        if len(best) == 2:
            row += f"   {best[1] / best[0]:>6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
