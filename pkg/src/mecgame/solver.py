"""Analytic derivatives of the disutility and the constrained proximal solver.

The heavy lifting happens in the selected kernel backend (see
:mod:`mecgame._core`); this module packs scenario data into the kernel's flat
layout, translates statuses into exceptions, and handles columns that other
devices have saturated (those are excluded from the subproblem and pinned
to zero rather than making the whole subproblem infeasible).
"""

import math

from dataclasses import dataclass

import numpy as np

from . import _core
from ._core import kernel as _kernel
from .errors import InfeasibleSubproblem, NoConvergence, StabilityViolation
from .model import DELTA_STAB

_ROOM_MIN = 1e-9  # must match the kernel's column-usability threshold
_ACTIVE_SLACK = 1e-5  # constraints this close to binding count as active


@dataclass(frozen=True)
class SolverParams:
    barrier_t0: float = 1.0
    barrier_mu: float = 10.0
    tol_kkt: float = 1e-8
    max_newton_iters: int = 60
    delta_stab: float = DELTA_STAB

    def __post_init__(self):
        if not self.barrier_mu > 1.0:
            raise ValueError("barrier_mu must be > 1")
        if not self.tol_kkt > 0.0:
            raise ValueError("tol_kkt must be > 0")


@dataclass(frozen=True)
class Gradient:
    g: np.ndarray


@dataclass(frozen=True)
class CurvatureTerms:
    gamma: float
    upsilon: float
    psi: np.ndarray


@dataclass(frozen=True)
class Hessian:
    h: np.ndarray


def pack_device(scenario, i):
    dev = scenario.devices[i]
    out = np.empty(_core.DEV_LEN)
    out[_core.DEV_LAM] = dev.lam
    out[_core.DEV_C] = dev.c
    out[_core.DEV_Z] = dev.z
    out[_core.DEV_FMD] = dev.f_md
    out[_core.DEV_EPSL] = dev.eps_local
    out[_core.DEV_EPSTX] = dev.eps_tx
    out[_core.DEV_DMAX] = dev.d_max
    out[_core.DEV_EMAX] = dev.e_max
    out[_core.DEV_PMAX] = dev.p_max
    out[_core.DEV_THD] = dev.theta_d
    out[_core.DEV_THE] = dev.theta_e
    out[_core.DEV_THP] = dev.theta_p
    out[_core.DEV_R] = scenario.uplink_rates[i]
    out[_core.DEV_S2] = scenario.s2bar[i]
    return out


def pack_osps(scenario):
    kinds = np.array([1.0 if scenario.is_edge(j) else 0.0
                      for j in range(scenario.n)])
    f_osp = np.array([o.f_osp for o in scenario.osps], dtype=float)
    return kinds, f_osp


def wired_row(scenario, i):
    return np.array([scenario.wired_delay(i, j) for j in range(scenario.n)])


def load_others(scenario, profile, i):
    """Per-OSP load from every device except i, cycles/s."""
    u = np.array([d.lam * d.c for d in scenario.devices])
    load = profile.alpha.T @ u
    load -= profile.alpha[i] * u[i]
    return load


def _check_interior(scenario, i, profile):
    """Raise a precise StabilityViolation if device i's queues are saturated."""
    dev = scenario.devices[i]
    s = float(np.sum(profile.alpha[i]))
    util3 = (1.0 - s) * dev.lam * dev.c / dev.f_md
    if util3 >= 1.0:
        raise StabilityViolation("C3", i, util3)
    util4 = dev.lam * dev.z * s / scenario.uplink_rates[i]
    if util4 >= 1.0:
        raise StabilityViolation("C4", i, util4)
    u = np.array([d.lam * d.c for d in scenario.devices])
    loads = profile.alpha.T @ u
    for j in range(scenario.n):
        if scenario.is_edge(j) and profile.alpha[i, j] > 0:
            util5 = loads[j] / scenario.osps[j].f_osp
            if util5 >= 1.0:
                raise StabilityViolation("C5", j, util5)


def grad_disutility(scenario, i, profile, prices):
    """Exact gradient of device i's disutility with respect to its own row."""
    _check_interior(scenario, i, profile)
    kinds, f_osp = pack_osps(scenario)
    out = np.empty(scenario.n)
    status = _kernel.eval_grad(
        pack_device(scenario, i), kinds, f_osp, wired_row(scenario, i),
        np.asarray(prices.p, dtype=float), load_others(scenario, profile, i),
        np.ascontiguousarray(profile.alpha[i], dtype=float), out)
    if status != _core.STATUS_OK:
        raise StabilityViolation("C3", i, float("nan"))
    return Gradient(g=out)


def curvature_terms(scenario, i, profile):
    """Load-curvature scalars and the per-edge-server curvature vector."""
    _check_interior(scenario, i, profile)
    kinds, f_osp = pack_osps(scenario)
    out2 = np.empty(2)
    psi = np.empty(scenario.n)
    status = _kernel.eval_curv(
        pack_device(scenario, i), kinds, f_osp,
        load_others(scenario, profile, i),
        np.ascontiguousarray(profile.alpha[i], dtype=float), out2, psi)
    if status != _core.STATUS_OK:
        raise StabilityViolation("C3", i, float("nan"))
    return CurvatureTerms(gamma=float(out2[0]), upsilon=float(out2[1]), psi=psi)


def hessian_disutility(scenario, i, profile):
    """Exact Hessian of device i's disutility in its own row (symmetric PSD)."""
    _check_interior(scenario, i, profile)
    kinds, f_osp = pack_osps(scenario)
    out = np.empty(scenario.n * scenario.n)
    status = _kernel.eval_hess(
        pack_device(scenario, i), kinds, f_osp,
        load_others(scenario, profile, i),
        np.ascontiguousarray(profile.alpha[i], dtype=float), out)
    if status != _core.STATUS_OK:
        raise StabilityViolation("C3", i, float("nan"))
    return Hessian(h=out.reshape(scenario.n, scenario.n))


def disutility_at_row(scenario, i, row, load_oth, prices):
    """Kernel-level disutility of device i at an arbitrary own row.

    ``load_oth`` is the per-OSP load from the other devices.  Returns None
    when a queue saturates instead of raising (grid-search helper).
    """
    kinds, f_osp = pack_osps(scenario)
    out = np.empty(4)
    status = _kernel.eval_costs(
        pack_device(scenario, i), kinds, f_osp, wired_row(scenario, i),
        np.asarray(prices.p, dtype=float), np.asarray(load_oth, dtype=float),
        np.ascontiguousarray(row, dtype=float), out)
    if status != _core.STATUS_OK:
        return None
    return float(out[3])


def _cost_grad_parts(scenario, i, row, load_oth):
    """Delay gradient vector and (scalar) energy gradient at an own row."""
    dev = scenario.devices[i]
    r = scenario.uplink_rates[i]
    s2 = scenario.s2bar[i]
    lc = dev.lam * dev.c
    s = float(np.sum(row))
    a_den = dev.f_md - (1.0 - s) * lc
    dloc = dev.c / a_den
    w_den = 1.0 - dev.lam * dev.z * s / r
    dtx = dev.lam * s2 * s / (2.0 * w_den) + dev.z / r
    t1 = -dloc - (1.0 - s) * lc * dev.c / a_den ** 2
    t2 = dtx + s * dev.lam * s2 / (2.0 * w_den ** 2)
    g_e = dev.eps_local * t1 + dev.eps_tx * t2
    g_d = np.empty(scenario.n)
    for j in range(scenario.n):
        w_j = scenario.wired_delay(i, j)
        if scenario.is_edge(j):
            g_j = scenario.osps[j].f_osp - (load_oth[j] + row[j] * lc)
            g_d[j] = t1 + t2 + w_j + dev.c / g_j + row[j] * lc * dev.c / g_j ** 2
        else:
            g_d[j] = t1 + t2 + w_j + dev.c / scenario.osps[j].f_osp
    return g_d, g_e


def _subproblem_constraints(scenario, i, row, load_oth, prices, delta_stab):
    """Slack values and gradients of C1-C8 for device i's subproblem.

    Returns (slacks, grads) with one row per constraint; slack = -g so a
    feasible interior point has every slack > 0.  Slacks are dimensionless.
    """
    dev = scenario.devices[i]
    n = scenario.n
    lc = dev.lam * dev.c
    stab_cap = 1.0 - delta_stab
    s = float(np.sum(row))
    kinds, f_osp = pack_osps(scenario)
    out = np.empty(4)
    status = _kernel.eval_costs(
        pack_device(scenario, i), kinds, f_osp, wired_row(scenario, i),
        np.asarray(prices.p, dtype=float), np.asarray(load_oth, dtype=float),
        np.ascontiguousarray(row, dtype=float), out)
    if status != _core.STATUS_OK:
        raise StabilityViolation("C3", i, float("nan"))
    d_val, e_val, p_val = out[0], out[1], out[2]
    g_d, g_e = _cost_grad_parts(scenario, i, row, load_oth)

    slacks = []
    grads = []
    ones = np.ones(n)
    for j in range(n):
        e_j = np.zeros(n)
        e_j[j] = 1.0
        slacks.append(row[j])
        grads.append(-e_j)
        slacks.append(1.0 - row[j])
        grads.append(e_j)
        if scenario.is_edge(j):
            slacks.append(stab_cap - (load_oth[j] + row[j] * lc) / f_osp[j])
            grads.append(e_j * (lc / f_osp[j]))
    slacks.append(1.0 - s)
    grads.append(ones)
    slacks.append(stab_cap - (1.0 - s) * lc / dev.f_md)
    grads.append(-ones * (lc / dev.f_md))
    slacks.append(stab_cap - dev.lam * dev.z * s / scenario.uplink_rates[i])
    grads.append(ones * (dev.lam * dev.z / scenario.uplink_rates[i]))
    slacks.append(1.0 - d_val / dev.d_max)
    grads.append(g_d / dev.d_max)
    slacks.append(1.0 - e_val / dev.e_max)
    grads.append(ones * (g_e / dev.e_max))
    slacks.append(1.0 - p_val / dev.p_max)
    grads.append(np.asarray(prices.p) * (lc / dev.p_max))
    return np.array(slacks), np.array(grads)


def kkt_stationarity(scenario, i, row, load_oth, prices, beta, tau, barrier_t,
                     delta_stab=DELTA_STAB, free_cols=None):
    """Raw and projected stationarity residuals of the proximal objective.

    The raw residual is |grad F + sum(lambda_k grad g_k)| with the barrier
    multipliers lambda_k = 1/(t * slack_k); the projected residual removes
    the components along the normals of active (slack <= 1e-5) constraints,
    which is the meaningful optimality measure at a constrained solution.
    Both are normalized by 1 + |grad F| + sqrt(eps) * tau: the tau term is
    the roundoff floor of the proximal curvature (position errors below one
    ulp of alpha are unrepresentable yet produce residuals ~ eps * tau).
    """
    n = scenario.n
    if free_cols is None:
        free_cols = np.ones(n, dtype=bool)
    kinds, f_osp = pack_osps(scenario)
    g_u = np.empty(n)
    status = _kernel.eval_grad(
        pack_device(scenario, i), kinds, f_osp, wired_row(scenario, i),
        np.asarray(prices.p, dtype=float), np.asarray(load_oth, dtype=float),
        np.ascontiguousarray(row, dtype=float), g_u)
    if status != _core.STATUS_OK:
        raise StabilityViolation("C3", i, float("nan"))
    slacks, grads = _subproblem_constraints(scenario, i, row, load_oth,
                                            prices, delta_stab)
    if np.any(slacks <= 0.0):
        return float("inf"), float("inf")
    grad_f = g_u + tau * (np.asarray(row) - np.asarray(beta))
    scale = (1.0 + float(np.linalg.norm(grad_f[free_cols]))
             + math.sqrt(np.finfo(float).eps) * tau)
    resid = grad_f + grads.T @ (1.0 / (barrier_t * slacks))
    resid = resid[free_cols]
    active = slacks <= _ACTIVE_SLACK
    raw = float(np.linalg.norm(resid)) / scale
    if not np.any(active):
        return raw, raw
    basis = grads[active][:, free_cols].T
    q, _ = np.linalg.qr(basis)
    projected = resid - q @ (q.T @ resid)
    return raw, float(np.linalg.norm(projected)) / scale


def solve_proximal(scenario, i, profile_others, prices, beta, tau,
                   params=None, return_info=False):
    """Best response of device i with proximal weight tau around beta.

    ``profile_others`` supplies the other devices' rows (row i is ignored).
    Edge columns whose stability headroom is exhausted by the others are
    excluded and returned as exact zeros.  Raises InfeasibleSubproblem when
    no strictly feasible point exists and NoConvergence when the barrier
    solve cannot reach its KKT tolerance.
    """
    if params is None:
        params = SolverParams()
    if tau < 0:
        raise ValueError("tau must be >= 0")
    n = scenario.n
    dev = pack_device(scenario, i)
    kinds, f_osp = pack_osps(scenario)
    wired = wired_row(scenario, i)
    p = np.asarray(prices.p, dtype=float)
    load_oth = load_others(scenario, profile_others, i)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (n,):
        raise ValueError("beta must have one entry per OSP")

    lc = scenario.devices[i].lam * scenario.devices[i].c
    stab_cap = 1.0 - params.delta_stab
    active = np.ones(n, dtype=bool)
    for j in range(n):
        if kinds[j] != 0.0:
            room = (stab_cap * f_osp[j] - load_oth[j]) / lc
            if room < _ROOM_MIN:
                active[j] = False

    out_alpha = np.zeros(n)
    out_diag = np.zeros(4)
    if active.all():
        status = _kernel.solve_prox(
            dev, kinds, f_osp, wired, p, load_oth, beta, float(tau),
            params.delta_stab, params.barrier_t0, params.barrier_mu,
            params.tol_kkt, params.max_newton_iters, out_alpha, out_diag)
    elif active.any():
        sub_alpha = np.zeros(int(active.sum()))
        status = _kernel.solve_prox(
            dev, np.ascontiguousarray(kinds[active]),
            np.ascontiguousarray(f_osp[active]),
            np.ascontiguousarray(wired[active]),
            np.ascontiguousarray(p[active]),
            np.ascontiguousarray(load_oth[active]),
            np.ascontiguousarray(beta[active]), float(tau),
            params.delta_stab, params.barrier_t0, params.barrier_mu,
            params.tol_kkt, params.max_newton_iters, sub_alpha, out_diag)
        out_alpha[active] = sub_alpha
    else:
        # Nothing to offload to: the only candidate is the all-local row.
        value = disutility_at_row(scenario, i, out_alpha, load_oth, prices)
        dev_params = scenario.devices[i]
        util3 = dev_params.lam * dev_params.c / dev_params.f_md
        if value is None or util3 > stab_cap:
            raise InfeasibleSubproblem(
                f"device {i}: all OSP columns saturated and local-only "
                "operation is outside the feasible set")
        costs = np.empty(4)
        _kernel.eval_costs(dev, kinds, f_osp, wired, p, load_oth,
                           out_alpha, costs)
        if (costs[0] > dev_params.d_max or costs[1] > dev_params.e_max
                or costs[2] > dev_params.p_max):
            raise InfeasibleSubproblem(
                f"device {i}: all OSP columns saturated and the all-local "
                "row violates a cap")
        status = _core.SOLVE_OK

    if status == _core.SOLVE_INFEASIBLE:
        raise InfeasibleSubproblem(
            f"device {i}: no strictly feasible point for the proximal "
            "subproblem")
    if status == _core.SOLVE_NO_CONVERGENCE:
        raise NoConvergence(
            f"device {i}: barrier solve left the feasible interior")

    kkt_raw = float(out_diag[0])
    kkt_projected = kkt_raw
    if active.any() and kkt_raw > params.tol_kkt:
        kkt_raw, kkt_projected = kkt_stationarity(
            scenario, i, out_alpha, load_oth, prices, beta, tau,
            out_diag[1], params.delta_stab, free_cols=active)
        if kkt_projected > params.tol_kkt:
            raise NoConvergence(
                f"device {i}: barrier solve stalled at projected KKT "
                f"residual {kkt_projected:.3e} (tol {params.tol_kkt:.1e})")
    if return_info:
        info = {"kkt_residual": kkt_raw,
                "kkt_projected": kkt_projected,
                "barrier_t": float(out_diag[1]),
                "newton_iterations": int(out_diag[2]),
                "phase1_used": bool(out_diag[3]),
                "active_columns": active.copy()}
        return out_alpha, info
    return out_alpha
