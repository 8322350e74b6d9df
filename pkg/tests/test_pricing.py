import numpy as np
import pytest

from mecgame.games import IpoaParams, ipoa
from mecgame.model import OspKind, PriceVector, StrategyProfile, osp_utility
from mecgame.pricing import (IspaParams, MarginalUtility, UpdateMode,
                             blind_pricing, ispa, marginal_utility,
                             price_update)
from mecgame.solver import disutility_at_row
from mecgame.harness import ScenarioSpec, default_prices, generate_scenario

from conftest import make_device, make_scenario, prices_gc


def tiny_params(max_iters=3):
    return IspaParams(max_iters=max_iters,
                      ipoa=IpoaParams(max_outer_iters=80))


class TestMarginalUtility:
    def test_zero_load_is_flat(self):
        # one device that never offloads to the expensive far edge
        dev = make_device(theta=(0.0, 0.0, 1.0), f_md_mhz=440.0)
        sc = make_scenario([dev], [(OspKind.EDGE, 2.0)])
        prices = prices_gc(5.0)  # absurdly expensive: payment-only device
        mu = marginal_utility(sc, 0, prices, tiny_params())
        assert mu.plus_eval == 0.0 and mu.minus_eval == 0.0
        assert mu.value == 0.0

    def test_sign_matches_end_to_end_oracle(self):
        dev = make_device(f_md_mhz=400.0)
        sc = make_scenario([dev], [(OspKind.EDGE, 2.0)])
        params = tiny_params()
        prices = prices_gc(0.1)
        mu = marginal_utility(sc, 0, prices, params)

        def utility_at(p_gc):
            # independent chain: grid-search best response + revenue formula
            pv = prices_gc(p_gc)
            best, best_val = 0.0, np.inf
            for a in np.arange(0.0, 1.0 + 1e-9, 1e-3):
                val = disutility_at_row(sc, 0, np.array([a]), np.zeros(1), pv)
                if val is not None and val < best_val:
                    best_val, best = val, a
            return pv.p[0] * dev.lam * dev.c * best

        eta_gc = params.eta * 1e9
        diff = utility_at(0.1 + eta_gc) - utility_at(0.1 - eta_gc)
        assert np.sign(mu.value) == np.sign(diff)

    def test_central_difference_identity(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=1, seed=2))
        prices = prices_gc(0.2, 0.1)
        mu = marginal_utility(sc, 1, prices, tiny_params())
        assert mu.value == (mu.plus_eval - mu.minus_eval) / (2 * mu.eta)
        assert not mu.one_sided

    def test_one_sided_at_price_floor(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=1, seed=2))
        prices = PriceVector(sc.p_min_array().copy())
        mu = marginal_utility(sc, 0, prices, tiny_params())
        assert mu.one_sided
        assert mu.eta == tiny_params().eta / 2
        assert mu.value == (mu.plus_eval - mu.minus_eval) / (2 * mu.eta)

    def test_richardson_step_halving(self):
        sc = generate_scenario(ScenarioSpec(m=5, n_cloud=1, n_edge=2, seed=3))
        prices = prices_gc(0.2, 0.1, 0.1)
        base = tiny_params()
        wide = marginal_utility(sc, 1, prices, base)
        import dataclasses
        narrow_params = dataclasses.replace(base, eta=base.eta / 2)
        narrow = marginal_utility(sc, 1, prices, narrow_params)
        # halving eta moves the estimate only slightly on a smooth instance
        scale = max(abs(wide.value), abs(narrow.value), 1.0)
        assert abs(wide.value - narrow.value) <= 0.05 * scale


class TestPriceUpdate:
    def test_zero_marginal_utility_keeps_price(self, small_scenario):
        prices = prices_gc(0.2, 0.1, 0.1)
        mu = MarginalUtility(value=0.0, plus_eval=1.0, minus_eval=1.0,
                             eta=1e-12)
        assert price_update(small_scenario, 1, prices, mu, tiny_params()) \
            == prices.p[1]

    def test_clipped_at_minimum_price(self, small_scenario):
        prices = prices_gc(0.2, 0.1, 0.1)
        mu = MarginalUtility(value=-1e12, plus_eval=0.0, minus_eval=1.0,
                             eta=1e-12)
        assert price_update(small_scenario, 1, prices, mu, tiny_params()) \
            == small_scenario.osps[1].p_min

    def test_hand_arithmetic(self, small_scenario):
        params = IspaParams(delta_step=1e-12, max_iters=1)
        prices = PriceVector(np.array([1e-10, 1e-10, 1e-10]))
        mu = MarginalUtility(value=2e-2, plus_eval=0.0, minus_eval=0.0,
                             eta=1e-12)
        got = price_update(small_scenario, 0, prices, mu, params)
        assert got == pytest.approx(1e-10 + 1e-12 * 2e-2, rel=1e-12)


class TestIspa:
    def test_zero_iterations_returns_initial_state(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=1, seed=2))
        p0 = PriceVector(sc.p_min_array().copy())
        result = ispa(sc, tiny_params(max_iters=0), p0)
        assert len(result.trace) == 1
        np.testing.assert_array_equal(result.prices.p, p0.p)
        ref = ipoa(sc, p0, IpoaParams(max_outer_iters=80))
        np.testing.assert_array_equal(result.profile.alpha, ref.profile.alpha)

    def test_prices_never_below_minimum(self):
        sc = generate_scenario(ScenarioSpec(m=6, n_cloud=1, n_edge=2, seed=1))
        result = ispa(sc, tiny_params(max_iters=4))
        p_min = sc.p_min_array()
        for rec in result.trace:
            assert np.all(rec.prices >= p_min - 1e-30)

    def test_utilities_recorded_consistently(self):
        sc = generate_scenario(ScenarioSpec(m=6, n_cloud=1, n_edge=2, seed=1))
        result = ispa(sc, tiny_params(max_iters=2))
        rec = result.trace[-1]
        prof = StrategyProfile(rec.profile)
        pv = PriceVector(rec.prices)
        for j in range(sc.n):
            assert rec.utilities[j] == pytest.approx(
                osp_utility(sc, j, prof, pv), rel=1e-12)

    def test_deterministic(self):
        sc = generate_scenario(ScenarioSpec(m=5, n_cloud=1, n_edge=2, seed=4))
        a = ispa(sc, tiny_params(max_iters=3))
        b = ispa(sc, tiny_params(max_iters=3))
        for rec_a, rec_b in zip(a.trace, b.trace):
            np.testing.assert_array_equal(rec_a.prices, rec_b.prices)
            np.testing.assert_array_equal(rec_a.utilities, rec_b.utilities)

    def test_gauss_seidel_mode_runs(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=1, seed=2))
        params = IspaParams(max_iters=2, update_mode=UpdateMode.GAUSS_SEIDEL,
                            ipoa=IpoaParams(max_outer_iters=80))
        result = ispa(sc, params)
        assert len(result.trace) == 3

    def test_records_serialize(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=1, seed=2))
        result = ispa(sc, tiny_params(max_iters=1))
        records = result.records()
        assert set(records[0]) == {"iter", "prices_usd_per_cycle",
                                   "utilities_usd_per_s", "degraded_flags"}
        with_profiles = result.records(include_profile=True)
        assert "profile" in with_profiles[0]


class TestBlindPricing:
    def test_single_iteration_hits_target(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=1, seed=2))
        p0 = PriceVector(sc.p_min_array().copy())
        targets = p0.p * 3.0
        result = blind_pricing(sc, tiny_params(max_iters=1), p0, targets)
        np.testing.assert_allclose(result.prices.p, targets, rtol=1e-15)

    def test_linear_schedule_midpoint(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=1, seed=2))
        p0 = PriceVector(sc.p_min_array().copy())
        targets = p0.p * 2.0
        result = blind_pricing(sc, tiny_params(max_iters=50), p0, targets)
        mid = result.trace[25].prices
        np.testing.assert_allclose(mid, (p0.p + targets) / 2, rtol=1e-12)

    def test_targets_must_dominate_start(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=1, seed=2))
        p0 = PriceVector(sc.p_min_array().copy())
        with pytest.raises(ValueError):
            blind_pricing(sc, tiny_params(max_iters=1), p0, p0.p * 0.5)
