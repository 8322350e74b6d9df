"""The compiled kernel and the pure-Python twin must agree bit for bit."""

import numpy as np
import pytest

from mecgame._core import available_backends, get_kernel


needs_compiled = pytest.mark.skipif(
    "compiled" not in available_backends(),
    reason="compiled kernel not built")


def random_instance(rng):
    n = int(rng.integers(1, 7))
    n_cloud = int(rng.integers(0, n + 1))
    lam = rng.uniform(0.3, 0.5)
    dev = np.array([lam, 3e8, 5e5, rng.uniform(3.0e8, 4.5e8), 0.5,
                    rng.uniform(0.1, 1.0), 1.0, 1.0, 0.1,
                    0.4, 0.3, 0.3, rng.uniform(2e6, 9e8), 0.0])
    dev[13] = (dev[2] / dev[12]) ** 2
    kinds = np.array([0.0] * n_cloud + [1.0] * (n - n_cloud))
    f_osp = rng.uniform(1.44e9, 2.9e9, n)
    wired = np.where(kinds == 0.0, 5e-5, 0.0)
    prices = rng.uniform(5e-11, 3e-10, n)
    load_oth = rng.uniform(0, 8e8, n)
    return n, dev, kinds, f_osp, wired, prices, load_oth


@needs_compiled
class TestBitIdentity:
    def test_eval_functions(self):
        py = get_kernel("python")
        cy = get_kernel("compiled")
        rng = np.random.default_rng(11)
        for _ in range(100):
            n, dev, kinds, f_osp, wired, prices, load_oth = \
                random_instance(rng)
            alpha = rng.uniform(0.0, 0.9 / n, n)
            for name, extra in (("eval_costs", (wired, prices)),
                                ("eval_grad", (wired, prices))):
                out_a = np.zeros(4 if name == "eval_costs" else n)
                out_b = out_a.copy()
                st_a = getattr(py, name)(dev, kinds, f_osp, *extra, load_oth,
                                         alpha, out_a)
                st_b = getattr(cy, name)(dev, kinds, f_osp, *extra, load_oth,
                                         alpha, out_b)
                assert st_a == st_b
                np.testing.assert_array_equal(out_a, out_b)
            out2a, psia = np.zeros(2), np.zeros(n)
            out2b, psib = np.zeros(2), np.zeros(n)
            assert py.eval_curv(dev, kinds, f_osp, load_oth, alpha,
                                out2a, psia) \
                == cy.eval_curv(dev, kinds, f_osp, load_oth, alpha,
                                out2b, psib)
            np.testing.assert_array_equal(out2a, out2b)
            np.testing.assert_array_equal(psia, psib)
            ha, hb = np.zeros(n * n), np.zeros(n * n)
            assert py.eval_hess(dev, kinds, f_osp, load_oth, alpha, ha) \
                == cy.eval_hess(dev, kinds, f_osp, load_oth, alpha, hb)
            np.testing.assert_array_equal(ha, hb)

    def test_solve_prox(self):
        py = get_kernel("python")
        cy = get_kernel("compiled")
        rng = np.random.default_rng(42)
        agreements = 0
        for _ in range(120):
            n, dev, kinds, f_osp, wired, prices, load_oth = \
                random_instance(rng)
            beta = rng.uniform(0, 0.2, n)
            tau = float(rng.choice([0.0, 0.1, 1.0, 5.0]))
            a_py, d_py = np.zeros(n), np.zeros(4)
            a_cy, d_cy = np.zeros(n), np.zeros(4)
            st_py = py.solve_prox(dev, kinds, f_osp, wired, prices, load_oth,
                                  beta, tau, 1e-4, 1.0, 10.0, 1e-8, 60,
                                  a_py, d_py)
            st_cy = cy.solve_prox(dev, kinds, f_osp, wired, prices, load_oth,
                                  beta, tau, 1e-4, 1.0, 10.0, 1e-8, 60,
                                  a_cy, d_cy)
            assert st_py == st_cy
            np.testing.assert_array_equal(a_py, a_cy)
            np.testing.assert_array_equal(d_py, d_cy)
            agreements += 1
        assert agreements == 120
