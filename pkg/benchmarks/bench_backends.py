"""Benchmark the compiled kernel against the pure-Python fallback.

Usage: python benchmarks/bench_backends.py [--repeats N]

Times the per-device proximal barrier solve (the hot kernel of every
follower round) and the fused cost/derivative evaluations on a
Table-2-scale instance, for each available backend.
"""

import argparse
import time

import numpy as np

from mecgame._core import available_backends, get_kernel


def instance():
    dev = np.array([25 / 60, 3e8, 5e5, 3.6e8, 0.5, 0.4, 1.0, 1.0, 0.1,
                    0.4, 0.3, 0.3, 2.9e6, 0.0])
    dev[13] = (dev[2] / dev[12]) ** 2
    kinds = np.array([0.0, 1.0, 1.0, 1.0])
    f_osp = np.array([2.0e9, 1.8e9, 2.5e9, 1.5e9])
    wired = np.array([5e-5, 0.0, 0.0, 0.0])
    prices = np.array([2e-10, 1e-10, 1e-10, 1e-10])
    load_oth = np.full(4, 3e8)
    beta = np.zeros(4)
    return dev, kinds, f_osp, wired, prices, load_oth, beta


def bench(kernel, repeats):
    dev, kinds, f_osp, wired, prices, load_oth, beta = instance()
    alpha = np.full(4, 0.1)
    out4 = np.zeros(4)
    grad = np.zeros(4)
    diag = np.zeros(4)
    sol = np.zeros(4)

    t0 = time.perf_counter()
    for _ in range(repeats * 50):
        kernel.eval_costs(dev, kinds, f_osp, wired, prices, load_oth,
                          alpha, out4)
    t_eval = (time.perf_counter() - t0) / (repeats * 50)

    t0 = time.perf_counter()
    for _ in range(repeats * 50):
        kernel.eval_grad(dev, kinds, f_osp, wired, prices, load_oth,
                         alpha, grad)
    t_grad = (time.perf_counter() - t0) / (repeats * 50)

    t0 = time.perf_counter()
    for _ in range(repeats):
        kernel.solve_prox(dev, kinds, f_osp, wired, prices, load_oth, beta,
                          0.1, 1e-4, 1.0, 10.0, 1e-8, 60, sol, diag)
    t_solve = (time.perf_counter() - t0) / repeats
    return t_eval, t_grad, t_solve, sol.copy()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    rows = {}
    for name in available_backends():
        kernel = get_kernel(name)
        rows[name] = bench(kernel, args.repeats)

    print(f"{'backend':<10} {'eval_costs':>12} {'eval_grad':>12} "
          f"{'solve_prox':>12}")
    for name, (t_eval, t_grad, t_solve, _) in rows.items():
        print(f"{name:<10} {t_eval * 1e6:>10.2f}us {t_grad * 1e6:>10.2f}us "
              f"{t_solve * 1e3:>10.3f}ms")
    if len(rows) == 2:
        py = rows["python"]
        cy = rows["compiled"]
        print(f"\nspeedup: eval {py[0] / cy[0]:.0f}x, grad {py[1] / cy[1]:.0f}x, "
              f"solve {py[2] / cy[2]:.0f}x")
        same = np.array_equal(py[3], cy[3])
        print(f"solutions bit-identical: {same}")


if __name__ == "__main__":
    main()
