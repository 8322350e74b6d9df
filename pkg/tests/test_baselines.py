import itertools
import math

import numpy as np
import pytest

from mecgame.baselines import (BaselineKind, SocialOptParams,
                               baseline_profile, evaluate_baseline, poa,
                               socially_optimal)
from mecgame.games import IpoaParams, ipoa, profile_disutilities
from mecgame.model import OspKind, StrategyProfile
from mecgame.solver import disutility_at_row, solve_proximal
from mecgame.harness import ScenarioSpec, default_prices, generate_scenario

from conftest import make_device, make_scenario, prices_gc


class TestBaselineProfiles:
    def test_local_only_is_zero(self, small_scenario):
        prof = baseline_profile(small_scenario, BaselineKind.LOCAL_ONLY)
        np.testing.assert_array_equal(prof.alpha, np.zeros((3, 3)))

    def test_evenly_splits_over_n_plus_one(self):
        sc = generate_scenario(ScenarioSpec(m=5, n_cloud=1, n_edge=3, seed=1))
        prof = baseline_profile(sc, BaselineKind.EVENLY)
        np.testing.assert_allclose(prof.alpha, 0.2)
        np.testing.assert_allclose(prof.alpha.sum(axis=1), 0.8)

    def test_cloud_only_single_cloud(self, small_scenario):
        prof = baseline_profile(small_scenario, BaselineKind.CLOUD_ONLY)
        np.testing.assert_array_equal(prof.alpha[:, 0], np.ones(3))
        np.testing.assert_array_equal(prof.alpha[:, 1:], np.zeros((3, 2)))

    def test_cloud_only_splits_across_clouds(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=2, n_edge=1, seed=1))
        prof = baseline_profile(sc, BaselineKind.CLOUD_ONLY)
        np.testing.assert_allclose(prof.alpha[:, :2], 0.5)


class TestSociallyOptimal:
    def test_single_device_matches_best_response(self):
        dev = make_device(f_md_mhz=440.0)
        sc = make_scenario([dev], [(OspKind.CLOUD, 2.0), (OspKind.EDGE, 2.2)])
        prices = prices_gc(0.2, 0.1)
        res = socially_optimal(sc, prices, SocialOptParams(restarts=2,
                                                           seed=0))
        br = solve_proximal(sc, 0, StrategyProfile.zeros(1, 2), prices,
                            np.zeros(2), 0.0)
        u_br = disutility_at_row(sc, 0, br, np.zeros(2), prices)
        # the interior-point solve leaves a small boundary gap at a
        # vertex-type optimum
        assert res.objective == pytest.approx(u_br, abs=2e-4)

    def test_not_worse_than_equilibrium(self):
        sc = generate_scenario(ScenarioSpec(m=2, n_cloud=0, n_edge=1, seed=5))
        prices = prices_gc(0.1)
        ne = ipoa(sc, prices, IpoaParams(max_outer_iters=80))
        avg_ne = float(np.mean(profile_disutilities(sc, ne.profile.alpha,
                                                    prices)))
        so = socially_optimal(sc, prices, SocialOptParams(restarts=2, seed=0),
                              extra_starts=(ne.profile.alpha,))
        assert so.objective <= avg_ne + 1e-6

    def test_matches_exhaustive_grid_on_2x2(self):
        sc = generate_scenario(ScenarioSpec(m=2, n_cloud=1, n_edge=1, seed=6))
        prices = prices_gc(0.2, 0.1)
        so = socially_optimal(sc, prices, SocialOptParams(restarts=3, seed=0))
        # coarse grid then local refinement around the best coarse point
        grid = np.arange(0.0, 1.0001, 0.05)
        best = math.inf
        for a00, a01, a10, a11 in itertools.product(grid, repeat=4):
            if a00 + a01 > 1.0 or a10 + a11 > 1.0:
                continue
            alpha = np.array([[a00, a01], [a10, a11]])
            scores = profile_disutilities(sc, alpha, prices)
            val = float(np.mean(scores))
            if val < best:
                best = val
                best_alpha = alpha
        fine = np.arange(-0.05, 0.0501, 0.005)
        best_fine = best
        for d00, d01, d10, d11 in itertools.product(fine, repeat=4):
            alpha = best_alpha + np.array([[d00, d01], [d10, d11]])
            if np.any(alpha < 0) or np.any(alpha.sum(axis=1) > 1.0):
                continue
            scores = profile_disutilities(sc, alpha, prices)
            val = float(np.mean(scores))
            best_fine = min(best_fine, val)
        assert so.objective <= best_fine + 1e-3

    def test_restart_spread_logged(self):
        sc = generate_scenario(ScenarioSpec(m=3, n_cloud=1, n_edge=1, seed=7))
        prices = prices_gc(0.2, 0.1)
        res = socially_optimal(sc, prices, SocialOptParams(restarts=3,
                                                           seed=0))
        assert len(res.restart_objectives) == 4  # zero start + 3 restarts
        finite = [v for v in res.restart_objectives if not math.isnan(v)]
        assert min(finite) == pytest.approx(res.objective)


class TestPoa:
    def test_single_device_poa_is_one(self):
        dev = make_device(f_md_mhz=430.0)
        sc = make_scenario([dev], [(OspKind.CLOUD, 2.0), (OspKind.EDGE, 2.0)])
        prices = prices_gc(0.2, 0.1)
        report = poa(sc, prices, IpoaParams(max_outer_iters=60),
                     SocialOptParams(restarts=2, seed=0))
        assert report.poa == pytest.approx(1.0, abs=1e-4)

    def test_poa_at_least_one(self):
        sc = generate_scenario(ScenarioSpec(m=4, n_cloud=1, n_edge=2, seed=8))
        prices = prices_gc(0.2, 0.1, 0.1)
        report = poa(sc, prices, IpoaParams(max_outer_iters=80),
                     SocialOptParams(restarts=2, seed=0))
        assert report.poa >= 1.0 - 1e-6


class TestSchemeOrderingSmall:
    def test_equilibrium_dominates_fixed_schemes(self):
        sc = generate_scenario(ScenarioSpec(
            m=10, n_cloud=1, n_edge=3, seed=1,
            overrides={"lambda_tasks_per_min": 25.0, "eps_tx_w": 0.4}))
        prices = default_prices(sc)
        ne = ipoa(sc, prices, IpoaParams(max_outer_iters=60))
        avg_ne = float(np.mean(profile_disutilities(sc, ne.profile.alpha,
                                                    prices)))
        for kind in (BaselineKind.LOCAL_ONLY, BaselineKind.CLOUD_ONLY,
                     BaselineKind.EVENLY):
            value, feasible, _ = evaluate_baseline(sc, kind, prices)
            if feasible:
                assert avg_ne <= value + 1e-6, kind

    def test_local_only_invariant_under_tx_power(self):
        values = []
        for eps in (0.1, 0.4, 1.0):
            sc = generate_scenario(ScenarioSpec(
                m=8, seed=3, overrides={"eps_tx_w": eps}))
            prices = default_prices(sc)
            value, _, _ = evaluate_baseline(sc, BaselineKind.LOCAL_ONLY,
                                            prices)
            values.append(value)
        assert values[0] == values[1] == values[2]

    def test_infeasible_baseline_flagged_not_silent(self):
        # 50 devices fully on one edge exceeds any Table-2 edge capacity
        sc = generate_scenario(ScenarioSpec(m=50, n_cloud=0, n_edge=1,
                                            seed=1))
        prices = prices_gc(0.1)
        alpha = np.ones((50, 1))
        profile = StrategyProfile(alpha)
        scores = profile_disutilities(sc, alpha, prices)
        assert np.isinf(scores).all()
        value, feasible, _ = evaluate_baseline(sc, BaselineKind.EVENLY,
                                               prices)
        # evenly = 1/2 on the single edge: 50 * 0.5 * 1.25e8 > f_osp
        assert not feasible
        assert value == math.inf
