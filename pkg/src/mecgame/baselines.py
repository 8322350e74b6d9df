"""Comparison offloading schemes and the price-of-anarchy metric.

The socially optimal profile minimizes the average disutility over the
joint M x N strategy space.  The objective is smooth but not provably
jointly convex (edge congestion couples devices), so the solve is a
multi-start interior-point run (scipy trust-constr) over seeded random
feasible starting points, reporting the best result found.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import solver as _solver
from .errors import NoConvergence
from .games import ipoa, profile_disutilities
from .model import DELTA_STAB, OspKind, StrategyProfile, check_feasible, FeasibilityMargins


class BaselineKind(enum.Enum):
    LOCAL_ONLY = "local_only"
    CLOUD_ONLY = "cloud_only"
    EVENLY = "evenly"
    SOCIALLY_OPTIMAL = "socially_optimal"


@dataclass(frozen=True)
class SocialOptParams:
    restarts: int = 10
    seed: int = 0
    maxiter: int = 150
    delta_stab: float = DELTA_STAB


@dataclass(frozen=True)
class SocialOptResult:
    profile: StrategyProfile
    objective: float             # mean disutility at the best profile
    restart_objectives: tuple    # per-start objective (nan for failed starts)


@dataclass(frozen=True)
class PoaReport:
    avg_ne: float
    avg_so: float
    poa: float
    ne_converged: bool


def baseline_profile(scenario, kind, prices=None):
    """Fixed comparison profiles; feasibility is reported, never assumed."""
    m, n = scenario.m, scenario.n
    if kind is BaselineKind.LOCAL_ONLY:
        return StrategyProfile.zeros(m, n)
    if kind is BaselineKind.CLOUD_ONLY:
        alpha = np.zeros((m, n))
        n_cloud = scenario.n_cloud
        if n_cloud:
            for j in range(n):
                if not scenario.is_edge(j):
                    alpha[:, j] = 1.0 / n_cloud
        return StrategyProfile(alpha)
    if kind is BaselineKind.EVENLY:
        return StrategyProfile(np.full((m, n), 1.0 / (n + 1)))
    raise ValueError(f"no fixed profile for {kind}")


def _edge_mask(scenario):
    return np.array([scenario.is_edge(j) for j in range(scenario.n)])


class _SocialObjective:
    """Mean disutility and its exact gradient/Hessian over the joint profile.

    Splits each device's cost into a row-separable part and the edge-coupling
    part sum_x S_x / G_x with S_x = sum_i w_i (theta_d_i c_i / dmax_i)
    alpha[i, x] and G_x the edge headroom, whose derivatives close-form.
    """

    def __init__(self, scenario, prices):
        self.sc = scenario
        self.prices = np.asarray(prices.p, dtype=float)
        m, n = scenario.m, scenario.n
        self.m, self.n = m, n
        devs = scenario.devices
        self.w = 1.0 / m
        self.lam = np.array([d.lam for d in devs])
        self.c = np.array([d.c for d in devs])
        self.z = np.array([d.z for d in devs])
        self.fmd = np.array([d.f_md for d in devs])
        self.el = np.array([d.eps_local for d in devs])
        self.etx = np.array([d.eps_tx for d in devs])
        self.dmax = np.array([d.d_max for d in devs])
        self.emax = np.array([d.e_max for d in devs])
        self.pmax = np.array([d.p_max for d in devs])
        self.thd = np.array([d.theta_d for d in devs])
        self.the = np.array([d.theta_e for d in devs])
        self.thp = np.array([d.theta_p for d in devs])
        self.r = np.array(scenario.uplink_rates)
        self.s2 = np.array(scenario.s2bar)
        self.lc = self.lam * self.c
        self.edge = _edge_mask(scenario)
        self.f_osp = np.array([o.f_osp for o in scenario.osps])
        self.wired = np.array([[scenario.wired_delay(i, j) for j in range(n)]
                               for i in range(m)])
        # weighted coupling coefficient per device
        self.q = self.w * self.thd * self.c / self.dmax

    def value_grad(self, x):
        m, n = self.m, self.n
        a = x.reshape(m, n)
        s = a.sum(axis=1)
        a_den = self.fmd - (1.0 - s) * self.lc
        dloc = self.c / a_den
        kw = self.lam * self.z / self.r
        w_den = 1.0 - kw * s
        dtx = self.lam * self.s2 * s / (2.0 * w_den) + self.z / self.r
        d_sep = (1.0 - s) * dloc + s * dtx + (a * self.wired).sum(axis=1)
        for j in range(n):
            if not self.edge[j]:
                d_sep = d_sep + a[:, j] * (self.c / self.f_osp[j])
        e_val = (1.0 - s) * self.el * dloc + s * self.etx * dtx
        p_val = self.lc * (a @ self.prices)

        value = float(np.sum(self.w * (self.thd * d_sep / self.dmax
                                       + self.the * e_val / self.emax
                                       + self.thp * p_val / self.pmax)))
        loads = a.T @ self.lc
        g_edge = self.f_osp - loads
        s_x = np.zeros(n)
        for j in range(n):
            if self.edge[j]:
                s_x[j] = float(self.q @ a[:, j])
                value += s_x[j] / g_edge[j]

        t1 = -dloc - (1.0 - s) * self.lc * self.c / a_den ** 2
        t2 = dtx + s * self.lam * self.s2 / (2.0 * w_den ** 2)
        g_e = self.el * t1 + self.etx * t2
        base = (self.w * (self.thd * (t1 + t2) / self.dmax
                          + self.the * g_e / self.emax))
        grad = np.empty((m, n))
        for j in range(n):
            col = base + self.w * (self.thd * self.wired[:, j] / self.dmax
                                   + self.thp * self.lc * self.prices[j]
                                   / self.pmax)
            if self.edge[j]:
                col = col + self.q / g_edge[j] \
                    + s_x[j] * self.lc / g_edge[j] ** 2
            else:
                col = col + self.w * self.thd * (self.c / self.f_osp[j]) \
                    / self.dmax
            grad[:, j] = col
        return value, grad.ravel()

    def value(self, x):
        return self.value_grad(x)[0]

    def grad(self, x):
        return self.value_grad(x)[1]

    def hess(self, x):
        m, n = self.m, self.n
        a = x.reshape(m, n)
        s = a.sum(axis=1)
        a_den = self.fmd - (1.0 - s) * self.lc
        kw = self.lam * self.z / self.r
        w_den = 1.0 - kw * s
        gam = (2.0 * self.lc * self.c / a_den ** 2
               + (1.0 - s) * 2.0 * self.lc ** 2 * self.c / a_den ** 3)
        ups = (self.lam * self.s2 / w_den ** 2
               + s * self.lam ** 2 * self.s2 * self.z / (self.r * w_den ** 3))
        k_gam = self.thd / self.dmax + self.the * self.el / self.emax
        k_ups = self.thd / self.dmax + self.the * self.etx / self.emax
        row_coef = self.w * (k_gam * gam + k_ups * ups)
        h = np.zeros((m * n, m * n))
        for i in range(m):
            h[i * n:(i + 1) * n, i * n:(i + 1) * n] = row_coef[i]
        loads = a.T @ self.lc
        for j in range(n):
            if not self.edge[j]:
                continue
            g_x = self.f_osp[j] - loads[j]
            s_x = float(self.q @ a[:, j])
            cross = (np.outer(self.q, self.lc) + np.outer(self.lc, self.q)) \
                / g_x ** 2 + 2.0 * s_x * np.outer(self.lc, self.lc) / g_x ** 3
            h[j::n, j::n] += cross
        return h


def _cap_constraints(scenario, obj, prices):
    """Delay and energy caps (C6, C7) with an analytic dense Jacobian."""
    m, n = scenario.m, scenario.n

    def fun(x):
        a = x.reshape(m, n)
        s = a.sum(axis=1)
        a_den = obj.fmd - (1.0 - s) * obj.lc
        kw = obj.lam * obj.z / obj.r
        w_den = 1.0 - kw * s
        dloc = obj.c / a_den
        dtx = obj.lam * obj.s2 * s / (2.0 * w_den) + obj.z / obj.r
        d_val = (1.0 - s) * dloc + s * dtx + (a * obj.wired).sum(axis=1)
        loads = a.T @ obj.lc
        for j in range(n):
            if obj.edge[j]:
                d_val = d_val + a[:, j] * (obj.c / (obj.f_osp[j] - loads[j]))
            else:
                d_val = d_val + a[:, j] * (obj.c / obj.f_osp[j])
        e_val = (1.0 - s) * obj.el * dloc + s * obj.etx * dtx
        return np.concatenate([d_val / obj.dmax, e_val / obj.emax])

    def jac(x):
        a = x.reshape(m, n)
        s = a.sum(axis=1)
        a_den = obj.fmd - (1.0 - s) * obj.lc
        kw = obj.lam * obj.z / obj.r
        w_den = 1.0 - kw * s
        dloc = obj.c / a_den
        dtx = obj.lam * obj.s2 * s / (2.0 * w_den) + obj.z / obj.r
        t1 = -dloc - (1.0 - s) * obj.lc * obj.c / a_den ** 2
        t2 = dtx + s * obj.lam * obj.s2 / (2.0 * w_den ** 2)
        loads = a.T @ obj.lc
        jac_d = np.zeros((m, m * n))
        rows = np.arange(m)
        for j in range(n):
            col = t1 + t2 + obj.wired[:, j]
            if obj.edge[j]:
                g_x = obj.f_osp[j] - loads[j]
                col = col + obj.c / g_x + a[:, j] * obj.lc * obj.c / g_x ** 2
                # cross coupling through the shared edge queue
                cross = np.outer(a[:, j] * obj.c / g_x ** 2, obj.lc)
                np.fill_diagonal(cross, 0.0)
                jac_d[:, j::n] += cross
            else:
                col = col + obj.c / obj.f_osp[j]
            jac_d[rows, rows * n + j] += col
        jac_d /= obj.dmax[:, None]
        g_e = obj.el * t1 + obj.etx * t2
        jac_e = np.zeros((m, m * n))
        for j in range(n):
            jac_e[rows, rows * n + j] = g_e / obj.emax
        return np.vstack([jac_d, jac_e])

    return optimize.NonlinearConstraint(fun, -np.inf, 1.0, jac=jac)


def _random_feasible_start(scenario, rng, delta_stab):
    """A C1-C5 feasible joint profile with randomized rows."""
    m, n = scenario.m, scenario.n
    raw = rng.uniform(0.0, 1.0, size=(m, n))
    raw /= raw.sum(axis=1, keepdims=True)
    scale = rng.uniform(0.1, 0.9, size=(m, 1))
    alpha = raw * scale
    lc = np.array([d.lam * d.c for d in scenario.devices])
    # respect wireless stability per device
    for i, dev in enumerate(scenario.devices):
        s_cap = (1.0 - delta_stab) * scenario.uplink_rates[i] \
            / (dev.lam * dev.z)
        s_i = alpha[i].sum()
        if s_i > 0.9 * s_cap:
            alpha[i] *= 0.9 * s_cap / s_i
    # respect edge capacity margins
    loads = alpha.T @ lc
    for j in range(n):
        if scenario.is_edge(j):
            cap = 0.9 * (1.0 - delta_stab) * scenario.osps[j].f_osp
            if loads[j] > cap:
                alpha[:, j] *= cap / loads[j]
    return alpha


def socially_optimal(scenario, prices, params=None, extra_starts=()):
    """Best-found minimizer of the mean disutility over the joint profile.

    Runs an interior-point solve from the zero profile, seeded random
    feasible profiles, and any ``extra_starts``; returns the best feasible
    result with the per-restart objective spread.
    """
    if params is None:
        params = SocialOptParams()
    m, n = scenario.m, scenario.n
    obj = _SocialObjective(scenario, prices)

    lc = obj.lc
    stab = 1.0 - params.delta_stab
    # Row sums: C1 upper plus wireless stability (C4) upper; local stability
    # (C3) as a lower bound when the local queue alone would be too slow.
    row_mat = np.zeros((m, m * n))
    for i in range(m):
        row_mat[i, i * n:(i + 1) * n] = 1.0
    lb = np.maximum(0.0, 1.0 - stab * obj.fmd / lc)
    ub = np.minimum(1.0, stab * obj.r / (obj.lam * obj.z))
    constraints = [optimize.LinearConstraint(row_mat, lb, ub)]
    edge_rows = []
    edge_caps = []
    for j in range(n):
        if scenario.is_edge(j):
            row = np.zeros(m * n)
            row[j::n] = lc
            edge_rows.append(row)
            edge_caps.append(stab * scenario.osps[j].f_osp)
    if edge_rows:
        constraints.append(optimize.LinearConstraint(
            np.array(edge_rows), -np.inf, np.array(edge_caps)))
    # payment caps (C8) are linear in the profile
    pay_rows = np.zeros((m, m * n))
    for i in range(m):
        pay_rows[i, i * n:(i + 1) * n] = lc[i] * obj.prices
    constraints.append(optimize.LinearConstraint(
        pay_rows, -np.inf, obj.pmax))
    constraints.append(_cap_constraints(scenario, obj, prices))

    starts = [np.zeros((m, n))]
    for k in range(params.restarts):
        rng = np.random.Generator(
            np.random.Philox(key=(params.seed << 16) + k))
        starts.append(_random_feasible_start(scenario, rng,
                                             params.delta_stab))
    for extra in extra_starts:
        starts.append(np.asarray(extra, dtype=float))

    def grade(alpha):
        """Mean disutility if the profile is feasible, else None."""
        prof = StrategyProfile(alpha)
        val = float(np.mean(profile_disutilities(scenario, alpha, prices)))
        report = check_feasible(
            scenario, prof, prices,
            FeasibilityMargins(delta_stab=params.delta_stab / 2.0,
                               bound_tol=1e-7, cap_tol=1e-6))
        if not report.feasible or not math.isfinite(val):
            return None
        return val

    best = None
    best_val = math.inf
    spread = []
    for start in starts:
        candidates = []
        start_val = grade(start)
        if start_val is not None:
            candidates.append((start_val, start))
        try:
            res = optimize.minimize(
                obj.value_grad, start.ravel(), jac=True, hess=obj.hess,
                method="trust-constr", constraints=constraints,
                bounds=optimize.Bounds(0.0, 1.0),
                options={"maxiter": params.maxiter, "gtol": 1e-7,
                         "xtol": 1e-10, "verbose": 0})
            solved = np.clip(res.x.reshape(m, n), 0.0, 1.0)
            solved_val = grade(solved)
            if solved_val is not None:
                candidates.append((solved_val, solved))
        except Exception:
            pass
        if not candidates:
            spread.append(math.nan)
            continue
        val, cand = min(candidates, key=lambda item: item[0])
        spread.append(val)
        if val < best_val:
            best_val = val
            best = cand
    if best is None:
        raise NoConvergence("no socially-optimal restart produced a feasible "
                            "profile")
    return SocialOptResult(profile=StrategyProfile(best), objective=best_val,
                           restart_objectives=tuple(spread))


def evaluate_baseline(scenario, kind, prices, ipoa_params=None,
                      so_params=None):
    """Mean disutility of a scheme; (value, feasible, profile).

    Structurally infeasible fixed profiles report inf with feasible=False.
    """
    if kind is BaselineKind.SOCIALLY_OPTIMAL:
        res = socially_optimal(scenario, prices, so_params)
        return res.objective, True, res.profile
    prof = baseline_profile(scenario, kind)
    report = check_feasible(scenario, prof, prices, include_caps=False)
    scores = profile_disutilities(scenario, prof.alpha, prices)
    value = float(np.mean(scores))
    feasible = report.feasible and math.isfinite(value)
    return (value if feasible else math.inf), feasible, prof


def poa(scenario, prices, ipoa_params=None, so_params=None):
    """Price of anarchy: mean equilibrium disutility over the social optimum."""
    ne = ipoa(scenario, prices, ipoa_params)
    if ne.failure:
        raise NoConvergence(f"follower equilibrium failed: {ne.failure}")
    avg_ne = float(np.mean(profile_disutilities(scenario, ne.profile.alpha,
                                                prices)))
    so = socially_optimal(scenario, prices, so_params,
                          extra_starts=(ne.profile.alpha,))
    avg_so = so.objective
    return PoaReport(avg_ne=avg_ne, avg_so=avg_so, poa=avg_ne / avg_so,
                     ne_converged=ne.converged)
