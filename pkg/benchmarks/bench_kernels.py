"""Compare the compiled and pure-Python kernels.

Run ``python3 benchmarks/bench_kernels.py``; each row reports the best of
``--repeat`` wall-clock timings for both backends and their ratio, and
checks that the two produce identical results.
"""
import argparse
import time

import numpy as np

from stc_dmt.kernels import compiled_backend, python_backend
from stc_dmt.lattice import BOUNDARY_SLACK, alamouti_lattice
from stc_dmt.numfield import catalog_field


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def enumeration_cases():
    for name, lat in (("Alamouti", alamouti_lattice()), ("Q(zeta8)", catalog_field("Q(zeta8)").lattice)):
        R = np.linalg.cholesky(lat.gram).T.copy()
        for radius in (10.0, 20.0, 40.0):
            yield f"fp_enumerate {name} R={radius:g}", (R, (radius + BOUNDARY_SLACK) ** 2, 10**8, False)


def decode_cases(rng):
    for k, n_words, trials in ((4, 81, 200_000), (8, 81, 100_000), (16, 6561, 2_000)):
        A = rng.normal(size=(trials, k, k))
        Q = A @ A.transpose(0, 2, 1)
        z = rng.normal(size=(trials, k))
        # distinct codewords, so the argmin is unique up to rounding
        C = np.unique(rng.integers(-2, 3, size=(2 * n_words, k)), axis=0)[:n_words].astype(float)
        yield f"ml_argmin k={k} N={n_words} b={trials}", (Q, z, C)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if compiled_backend is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . --no-build-isolation")
    rng = np.random.default_rng(0)
    print(f"{'case':<40}{'compiled s':>12}{'python s':>12}{'speedup':>10}  agree")
    cases = [("fp_enumerate", *c) for c in enumeration_cases()] + [("ml_argmin", *c) for c in decode_cases(rng)]
    for kernel, label, call_args in cases:
        tc, out_c = best_of(lambda: getattr(compiled_backend, kernel)(*call_args), args.repeat)
        tp, out_p = best_of(lambda: getattr(python_backend, kernel)(*call_args), args.repeat)
        agree = out_c[0] == out_p[0] if kernel == "fp_enumerate" else bool(np.array_equal(out_c, out_p))
        print(f"{label:<40}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
