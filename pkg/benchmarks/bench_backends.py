"""Compare the compiled kernel extension against the pure-python mirror.

Times the three hot kernels on representative detection workloads and
prints a small table with per-kernel speedups.  Both backends are
imported directly (bypassing the automatic selection) so the comparison
works regardless of which one the package picked at import time.  If
the extension was never built, the python column is reported alone.

Run from the repository root:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --repeats 9 --solves 40
"""

import argparse
import math
import sys
import time

import numpy as np

from onebit_mimo import _kernels_py as py_kernels
from onebit_mimo.model import (
    draw_rayleigh_channel,
    draw_symbols,
    expand_real,
    indices_to_symbols,
    make_constellation,
    real_stack,
    sign_refine,
    transmit,
)
from onebit_mimo.numerics import RngStream

try:
    from onebit_mimo import _kernels as c_kernels
except ImportError:
    c_kernels = None

PGA_KAPPA = 0.01
PGA_EPSILON = 1e-3
PGA_MAX_ITER = 500


def _detection_rows(rng, n_r, k, rho, order):
    const = make_constellation("psk", order)
    h = draw_rayleigh_channel(rng, n_r, k)
    x = indices_to_symbols(const, draw_symbols(rng, const, k))
    _, q = transmit(h, x, rho, rng=rng)
    return sign_refine(expand_real(h), q)


def _qpsk_product(k):
    const = make_constellation("psk", 4)
    grids = np.meshgrid(*([np.arange(4)] * k), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    return np.stack([real_stack(indices_to_symbols(const, row))
                     for row in idx])


def _best_of(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="benchmark the compiled kernels against pure python"
    )
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per workload (best is kept)")
    parser.add_argument("--solves", type=int, default=25,
                        help="gradient-ascent solves per timing repeat")
    args = parser.parse_args(argv)
    if args.repeats < 1 or args.solves < 1:
        parser.error("--repeats and --solves must be >= 1")

    rng = RngStream(11, 0)
    rho = 10.0
    sqrt2rho = math.sqrt(2.0 * rho)

    grid = np.linspace(-40.0, 40.0, 1_000_000)
    pga_rows = [_detection_rows(RngStream(11, 1 + i), 128, 8, rho, 8)
                for i in range(args.solves)]
    scan_rows = _detection_rows(rng, 32, 4, rho, 4)
    cands = _qpsk_product(4)

    workloads = [
        (
            "log_norm_cdf, 1e6-point grid",
            lambda kern: kern.log_norm_cdf(grid),
        ),
        (
            "pga_solve, N_r=128 K=8, %d solves" % args.solves,
            lambda kern: [
                kern.pga_solve(r, sqrt2rho, 8.0, PGA_KAPPA, PGA_EPSILON,
                               PGA_MAX_ITER)
                for r in pga_rows
            ],
        ),
        (
            "scan_best, 256 candidates N_r=32",
            lambda kern: [kern.scan_best(scan_rows, sqrt2rho, cands)
                          for _ in range(50)],
        ),
    ]

    if c_kernels is None:
        print("compiled extension not built "
              "(pip install -e . rebuilds it); timing python only")
    else:
        # agreement spot checks so the speedup table is comparing
        # implementations that actually produce the same numbers
        dev_cdf = float(np.max(np.abs(
            c_kernels.log_norm_cdf(grid) - py_kernels.log_norm_cdf(grid)
        )))
        xc = c_kernels.pga_solve(pga_rows[0], sqrt2rho, 8.0, PGA_KAPPA,
                                 PGA_EPSILON, PGA_MAX_ITER)[0]
        xp = py_kernels.pga_solve(pga_rows[0], sqrt2rho, 8.0, PGA_KAPPA,
                                  PGA_EPSILON, PGA_MAX_ITER)[0]
        dev_pga = float(np.max(np.abs(xc - xp)))
        ic = c_kernels.scan_best(scan_rows, sqrt2rho, cands)[0]
        ip = py_kernels.scan_best(scan_rows, sqrt2rho, cands)[0]
        print("backend agreement: log_norm_cdf max |diff| %.2e, "
              "pga_solve max |diff| %.2e, scan_best pick %s"
              % (dev_cdf, dev_pga,
                 "identical" if ic == ip else "DIFFERS"))
        if dev_cdf > 1e-12 or dev_pga > 1e-9 or ic != ip:
            print("warning: backends disagree beyond tolerance; "
                  "timings below compare different computations")

    header = "%-36s %12s %12s %9s" % ("workload", "python", "compiled",
                                      "speedup")
    print()
    print(header)
    print("-" * len(header))
    for name, run in workloads:
        t_py = _best_of(lambda: run(py_kernels), args.repeats)
        if c_kernels is None:
            print("%-36s %9.2f ms %12s %9s" % (name, 1e3 * t_py, "-", "-"))
            continue
        t_c = _best_of(lambda: run(c_kernels), args.repeats)
        print("%-36s %9.2f ms %9.2f ms %8.1fx"
              % (name, 1e3 * t_py, 1e3 * t_c, t_py / t_c))
    return 0


if __name__ == "__main__":
    sys.exit(main())
