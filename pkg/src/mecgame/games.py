"""Follower-game algorithms and the leader-game existence condition.

The follower solver runs synchronous (Jacobi) rounds of proximally
regularized best responses: every device solves its subproblem against the
previous round's profile, then the round is merged.  Because the per-device
subproblems only see the *others'* load as fixed, a merged round can
overshoot an edge server's stability margin; the merge therefore damps the
whole round by the largest step that keeps every edge utilization at or
below 1 - 2*delta_stab, which also guarantees the next round's subproblems
keep a strictly feasible interior.  Near equilibrium demand settles below
the margins and the damping factor is 1 (plain Jacobi).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import solver as _solver
from ._core import STATUS_OK
from ._core import kernel as _kernel
from .errors import InfeasibleInitial, InfeasibleSubproblem, NoConvergence
from .model import FeasibilityMargins, StrategyProfile, check_feasible
from .solver import SolverParams


class CentroidMode(enum.Enum):
    EVERY_ROUND = "every_round"
    ON_INNER_CONVERGENCE = "on_inner_convergence"


@dataclass(frozen=True)
class IpoaParams:
    """Tuning of the follower-equilibrium iteration.

    ``tau`` is the proximal weight of the per-device subproblem.  ``momentum``
    extrapolates each merged round along the previous displacement (heavy-ball
    damping of the round-to-round dynamics); ``accept_tol`` is the minimum
    proximal-objective improvement a device needs before its new row is
    accepted, which stops value-indifferent sliding along flat directions of
    the equilibrium set.  Both are needed to reach pointwise (Frobenius)
    convergence at desk scale; neither affects equilibrium quality, which the
    unilateral-deviation check verifies independently.
    """

    tau: float = 0.1
    sigma_conv: float = 1e-3
    max_outer_iters: int = 200
    centroid_mode: CentroidMode = CentroidMode.EVERY_ROUND
    momentum: float = 0.5
    accept_tol: float = 1e-6
    solver: SolverParams = SolverParams()

    def __post_init__(self):
        if not self.sigma_conv > 0:
            raise ValueError("sigma_conv must be > 0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.accept_tol < 0.0:
            raise ValueError("accept_tol must be >= 0")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    frobenius_delta: float            # nan for the initial record
    per_device_disutility: np.ndarray
    merge_scale: float                # damping factor applied to the round
    profile: np.ndarray


@dataclass(frozen=True)
class RunTrace:
    rounds: tuple

    def records(self, include_profile=False):
        """Round records as JSON-serializable dicts (one per round)."""
        out = []
        for rec in self.rounds:
            entry = {
                "round": rec.round,
                "frobenius_delta": (None if math.isnan(rec.frobenius_delta)
                                    else rec.frobenius_delta),
                "per_device_disutility": [float(v)
                                          for v in rec.per_device_disutility],
            }
            if include_profile:
                entry["profile"] = [[float(v) for v in row]
                                    for row in rec.profile]
            out.append(entry)
        return out

    @property
    def deltas(self):
        return [rec.frobenius_delta for rec in self.rounds[1:]]


@dataclass(frozen=True)
class IpoaResult:
    profile: StrategyProfile
    iterations: int
    trace: RunTrace
    converged: bool
    failure: str = ""


@dataclass(frozen=True)
class LeaderDeviceCondition:
    pi: float
    theta_cap: float
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class LeaderConditionReport:
    per_device: tuple
    all_hold: bool


def _task_rates(scenario):
    return np.array([d.lam * d.c for d in scenario.devices])


def profile_disutilities(scenario, alpha, prices):
    """Per-device disutility vector at a joint profile (inf if saturated)."""
    u_vec = _task_rates(scenario)
    loads = alpha.T @ u_vec
    kinds, f_osp = _solver.pack_osps(scenario)
    p = np.asarray(prices.p, dtype=float)
    out = np.empty(scenario.m)
    costs = np.empty(4)
    for i in range(scenario.m):
        load_oth = loads - alpha[i] * u_vec[i]
        status = _kernel.eval_costs(
            _solver.pack_device(scenario, i), kinds, f_osp,
            _solver.wired_row(scenario, i), p, load_oth,
            np.ascontiguousarray(alpha[i]), costs)
        out[i] = costs[3] if status == STATUS_OK else math.inf
    return out


def _merge_scale(scenario, alpha, alpha_hat, u_vec, delta_merge):
    """Largest step in [0, 1] keeping every edge load at <= (1-delta)*f."""
    gamma = 1.0
    for j in range(scenario.n):
        if not scenario.is_edge(j):
            continue
        cap = (1.0 - delta_merge) * scenario.osps[j].f_osp
        t_cur = float(alpha[:, j] @ u_vec)
        t_hat = float(alpha_hat[:, j] @ u_vec)
        if t_hat > cap:
            gamma_j = (cap - t_cur) / (t_hat - t_cur)
            if gamma_j < gamma:
                gamma = max(0.0, gamma_j)
    return gamma


def ipoa(scenario, prices, params=None, initial=None):
    """Iterative proximal offloading: Jacobi rounds to a follower equilibrium.

    Terminates once two consecutive rounds move less than sigma_conv in
    Frobenius norm (a single sub-threshold dip is not enough).  Never raises
    mid-run: a failed round or an exhausted budget returns converged=False
    with the trace recorded so far.
    """
    if params is None:
        params = IpoaParams()
    if initial is None:
        initial = StrategyProfile.zeros(scenario.m, scenario.n)
    if initial.alpha.shape != (scenario.m, scenario.n):
        raise ValueError("initial profile has the wrong shape")
    margins = FeasibilityMargins(delta_stab=params.solver.delta_stab)
    report = check_feasible(scenario, initial, prices, margins,
                            include_caps=False)
    if not report.feasible:
        raise InfeasibleInitial(
            f"initial profile violates {[v[0] for v in report.violations]}")

    u_vec = _task_rates(scenario)
    kinds, f_osp = _solver.pack_osps(scenario)
    p = np.asarray(prices.p, dtype=float)
    alpha = initial.alpha.astype(float).copy()
    alpha_prev = alpha.copy()
    beta = alpha.copy()
    records = [RoundRecord(0, math.nan,
                           profile_disutilities(scenario, alpha, prices),
                           math.nan, alpha.copy())]
    converged = False
    failure = ""
    deltas = []
    costs = np.empty(4)
    for it in range(1, params.max_outer_iters + 1):
        snapshot = StrategyProfile(alpha)
        loads = alpha.T @ u_vec
        alpha_hat = alpha.copy()
        try:
            for i in range(scenario.m):
                cand = _solver.solve_proximal(
                    scenario, i, snapshot, prices, beta[i], params.tau,
                    params.solver)
                # Keep the old row unless the proximal objective improves
                # by more than the acceptance deadband.
                packed = _solver.pack_device(scenario, i)
                wired = _solver.wired_row(scenario, i)
                load_oth = loads - alpha[i] * u_vec[i]
                st_cur = _kernel.eval_costs(packed, kinds, f_osp, wired, p,
                                            load_oth,
                                            np.ascontiguousarray(alpha[i]),
                                            costs)
                if st_cur != STATUS_OK:
                    alpha_hat[i] = cand
                    continue
                obj_cur = costs[3] + 0.5 * params.tau * float(
                    np.sum((alpha[i] - beta[i]) ** 2))
                st_new = _kernel.eval_costs(packed, kinds, f_osp, wired, p,
                                            load_oth, cand, costs)
                if st_new != STATUS_OK:
                    continue
                obj_new = costs[3] + 0.5 * params.tau * float(
                    np.sum((cand - beta[i]) ** 2))
                if obj_cur - obj_new > params.accept_tol:
                    alpha_hat[i] = cand
        except (InfeasibleSubproblem, NoConvergence) as exc:
            failure = f"round {it}: {exc}"
            break
        target = alpha_hat
        if it >= 3 and params.momentum > 0.0:
            target = alpha_hat + params.momentum * (alpha - alpha_prev)
            target = np.clip(target, 0.0, 1.0)
            row_sums = target.sum(axis=1)
            over = row_sums > 1.0
            if over.any():
                target[over] *= (1.0 / row_sums[over])[:, None]
        gamma = _merge_scale(scenario, alpha, target, u_vec,
                             2.0 * params.solver.delta_stab)
        alpha_new = alpha + gamma * (target - alpha)
        delta = float(np.linalg.norm(alpha_new - alpha))
        alpha_prev = alpha
        alpha = alpha_new
        if params.centroid_mode is CentroidMode.EVERY_ROUND:
            beta = alpha.copy()
        elif delta <= 10.0 * params.sigma_conv:
            beta = alpha.copy()
        deltas.append(delta)
        records.append(RoundRecord(
            it, delta, profile_disutilities(scenario, alpha, prices),
            gamma, alpha.copy()))
        if (len(deltas) >= 2 and deltas[-1] <= params.sigma_conv
                and deltas[-2] <= params.sigma_conv):
            converged = True
            break
    return IpoaResult(profile=StrategyProfile(alpha), iterations=len(deltas),
                      trace=RunTrace(tuple(records)), converged=converged,
                      failure=failure)


def _grid_rows(n, step):
    """All rows on the step-grid of the simplex sum(alpha) <= 1."""
    k_max = int(round(1.0 / step))
    rows = []
    stack = [(0, [], k_max)]
    while stack:
        depth, prefix, budget = stack.pop()
        if depth == n:
            rows.append([v * step for v in prefix])
            continue
        for v in range(budget + 1):
            stack.append((depth + 1, prefix + [v], budget - v))
    out = np.array(rows)
    out[out > 1.0] = 1.0
    return out


def verify_ne(scenario, prices, profile, eps_ne=1e-3, grid_step=0.05,
              solver_params=None):
    """Check that no device can unilaterally improve by more than eps_ne.

    Each device is tested against its exact best response (the tau=0
    proximal solve; the subproblem is convex) and against a feasibility-
    filtered grid over its own row.  Returns (is_equilibrium, worst
    improvement found).
    """
    if solver_params is None:
        solver_params = SolverParams()
    alpha = profile.alpha
    u_vec = _task_rates(scenario)
    loads = alpha.T @ u_vec
    kinds, f_osp = _solver.pack_osps(scenario)
    p = np.asarray(prices.p, dtype=float)
    rows = _grid_rows(scenario.n, grid_step)
    row_sums = rows.sum(axis=1)
    stab_cap = 1.0 - solver_params.delta_stab
    worst = 0.0
    costs = np.empty(4)
    for i in range(scenario.m):
        dev = scenario.devices[i]
        packed = _solver.pack_device(scenario, i)
        wired = _solver.wired_row(scenario, i)
        load_oth = loads - alpha[i] * u_vec[i]
        status = _kernel.eval_costs(packed, kinds, f_osp, wired, p, load_oth,
                                    np.ascontiguousarray(alpha[i]), costs)
        if status != STATUS_OK:
            return False, math.inf
        u_cur = float(costs[3])
        best = u_cur
        try:
            br = _solver.solve_proximal(scenario, i, profile, prices,
                                        np.zeros(scenario.n), 0.0,
                                        solver_params)
            status = _kernel.eval_costs(packed, kinds, f_osp, wired, p,
                                        load_oth, br, costs)
            if status == STATUS_OK and costs[3] < best:
                best = float(costs[3])
        except (InfeasibleSubproblem, NoConvergence):
            pass
        lc = dev.lam * dev.c
        ok = row_sums <= 1.0
        ok &= (1.0 - row_sums) * lc / dev.f_md <= stab_cap
        ok &= dev.lam * dev.z * row_sums / scenario.uplink_rates[i] <= stab_cap
        for j in range(scenario.n):
            if scenario.is_edge(j):
                ok &= (load_oth[j] + rows[:, j] * lc) / f_osp[j] <= stab_cap
        for row in rows[ok]:
            status = _kernel.eval_costs(packed, kinds, f_osp, wired, p,
                                        load_oth, row, costs)
            if status != STATUS_OK:
                continue
            if (costs[0] > dev.d_max or costs[1] > dev.e_max
                    or costs[2] > dev.p_max):
                continue
            if costs[3] < best:
                best = float(costs[3])
        if u_cur - best > worst:
            worst = u_cur - best
    return worst <= eps_ne, worst


def check_leader_condition(scenario):
    """Per-device sufficient condition for a price equilibrium to exist.

    Transcribes the published inequality literally (including its printed
    fifth-power denominator); the wireless second moment enters as the same
    quantity the cost model uses.
    """
    per_device = []
    all_hold = True
    for i, dev in enumerate(scenario.devices):
        r = scenario.uplink_rates[i]
        s2 = scenario.s2bar[i]
        if dev.theta_p > 0.0:
            scale = dev.p_max / (dev.theta_p * dev.lam * dev.c)
        else:
            scale = math.inf
        pi = scale * (dev.theta_d / dev.d_max
                      + dev.theta_e * dev.eps_local / dev.e_max)
        theta_cap = scale * (dev.theta_d / dev.d_max
                             + dev.theta_e * dev.eps_tx / dev.e_max)
        slack = dev.f_md - dev.lam * dev.c
        lhs = 2.0 * pi * (dev.c ** 3 / slack ** 3
                          + dev.lam * dev.c ** 4 / slack ** 5)
        rhs = theta_cap * s2 * dev.z / r
        holds = bool(lhs <= rhs)
        per_device.append(LeaderDeviceCondition(pi=pi, theta_cap=theta_cap,
                                                lhs=lhs, rhs=rhs, holds=holds))
        all_hold = all_hold and holds
    return LeaderConditionReport(per_device=tuple(per_device),
                                 all_hold=all_hold)
