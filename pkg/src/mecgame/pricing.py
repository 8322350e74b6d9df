"""Leader-side price adjustment.

Each provider climbs its revenue curve with a clipped ascent step whose
direction comes from a central finite difference: the provider's utility is
re-evaluated at price +/- eta, each time re-solving the follower game so the
devices' reaction is priced in.  Blind pricing is the comparison scheme that
raises prices on a fixed linear schedule with no regard for the others.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import FollowerDiverged
from .games import IpoaParams, ipoa
from .model import PriceVector, osp_utility

#: Default ascent scale: price step per unit marginal utility,
#: ($/cycle) / (cycles/s).  Sized so a typical first step moves a few
#: percent of a Table-2-scale price.
DELTA_STEP_DEFAULT = 2e-21

#: Default finite-difference half-width, $/cycle (= 1e-3 $/Gcycle).
ETA_DEFAULT = 1e-12


class UpdateMode(enum.Enum):
    JACOBI = "jacobi"
    GAUSS_SEIDEL = "gauss_seidel"


@dataclass(frozen=True)
class IspaParams:
    delta_step: float = DELTA_STEP_DEFAULT   # scalar or length-N sequence
    eta: float = ETA_DEFAULT
    max_iters: int = 20
    update_mode: UpdateMode = UpdateMode.JACOBI
    ipoa: IpoaParams = IpoaParams()

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        steps = np.atleast_1d(np.asarray(self.delta_step, dtype=float))
        if not np.all(steps > 0):
            raise ValueError("delta_step entries must be > 0")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")

    def step_for(self, j):
        steps = np.atleast_1d(np.asarray(self.delta_step, dtype=float))
        return float(steps[0] if steps.size == 1 else steps[j])


@dataclass(frozen=True)
class MarginalUtility:
    """Central-difference estimate of d(utility)/d(price) for one OSP.

    ``value == (plus_eval - minus_eval) / (2 * eta)`` exactly; at the minimum
    price boundary a forward difference is used instead and recorded with the
    equivalent half-width ``eta = full_step / 2`` so the identity still holds.
    """

    value: float
    plus_eval: float
    minus_eval: float
    eta: float
    one_sided: bool = False
    degraded: bool = False


@dataclass(frozen=True)
class IspaIterationRecord:
    iteration: int
    prices: np.ndarray
    utilities: np.ndarray
    degraded: np.ndarray     # per-OSP: some follower sub-run did not converge
    profile: np.ndarray


@dataclass(frozen=True)
class IspaResult:
    prices: PriceVector
    profile: object          # StrategyProfile at the final prices
    trace: tuple

    def records(self, include_profile=False):
        out = []
        for rec in self.trace:
            entry = {
                "iter": rec.iteration,
                "prices_usd_per_cycle": [float(v) for v in rec.prices],
                "utilities_usd_per_s": [float(v) for v in rec.utilities],
                "degraded_flags": [bool(v) for v in rec.degraded],
            }
            if include_profile:
                entry["profile"] = [[float(v) for v in row]
                                    for row in rec.profile]
            out.append(entry)
        return out


def _osp_utilities(scenario, profile, prices):
    return np.array([osp_utility(scenario, j, profile, prices)
                     for j in range(scenario.n)])


def _equilibrium(scenario, prices, params, warm, on_diverge):
    """IPOA run warm-started from ``warm``; returns (result, degraded)."""
    res = ipoa(scenario, prices, params.ipoa, initial=warm)
    if res.converged:
        return res, False
    if on_diverge == "degrade":
        return res, True
    raise FollowerDiverged(
        f"follower game did not converge at prices {prices.p}")


def marginal_utility(scenario, j, prices, params, warm=None, base=None,
                     on_diverge="raise"):
    """Finite-difference marginal utility of OSP j at the current prices.

    ``warm`` seeds the follower re-equilibrations; ``base`` may carry a
    (profile, utilities) pair already computed at ``prices``, used as the
    low-side evaluation when the price floor forces a one-sided difference.
    """
    p_min = scenario.osps[j].p_min
    eta = params.eta
    degraded = False

    plus = prices.copy()
    plus.p[j] += eta
    res_plus, d = _equilibrium(scenario, plus, params, warm, on_diverge)
    degraded = degraded or d
    plus_eval = osp_utility(scenario, j, res_plus.profile, plus)

    if prices.p[j] - eta >= p_min:
        minus = prices.copy()
        minus.p[j] -= eta
        res_minus, d = _equilibrium(scenario, minus, params, warm, on_diverge)
        degraded = degraded or d
        minus_eval = osp_utility(scenario, j, res_minus.profile, minus)
        half = eta
        one_sided = False
    else:
        # Forward difference from the price floor.
        if base is not None:
            minus_eval = float(base[1][j])
        else:
            res_base, d = _equilibrium(scenario, prices, params, warm,
                                       on_diverge)
            degraded = degraded or d
            minus_eval = osp_utility(scenario, j, res_base.profile, prices)
        half = eta / 2.0
        one_sided = True
    value = (plus_eval - minus_eval) / (2.0 * half)
    return MarginalUtility(value=value, plus_eval=plus_eval,
                           minus_eval=minus_eval, eta=half,
                           one_sided=one_sided, degraded=degraded)


def price_update(scenario, j, prices, mu, params):
    """Clipped ascent step: max(p_j + step * marginal utility, p_min)."""
    candidate = prices.p[j] + params.step_for(j) * mu.value
    return float(max(candidate, scenario.osps[j].p_min))


def ispa(scenario, params=None, p0=None):
    """Iterative price competition with follower re-equilibration.

    Every iteration each OSP estimates its marginal utility (two follower
    re-solves) and takes a clipped ascent step; the new price vector is then
    announced and the follower game re-solved once more for the recorded
    state.  Follower sub-runs that exhaust their round budget degrade the
    record instead of aborting the run.
    """
    if params is None:
        params = IspaParams()
    p_min = scenario.p_min_array()
    if p0 is None:
        p0 = PriceVector(p_min.copy())
    prices = PriceVector(np.asarray(p0.p, dtype=float).copy())
    if np.any(prices.p < p_min):
        raise ValueError("p0 must respect every OSP's minimum price")

    res, degraded0 = _equilibrium(scenario, prices, params, None, "degrade")
    profile = res.profile
    utilities = _osp_utilities(scenario, profile, prices)
    trace = [IspaIterationRecord(
        iteration=0, prices=prices.p.copy(), utilities=utilities,
        degraded=np.full(scenario.n, degraded0), profile=profile.alpha.copy())]

    for k in range(1, params.max_iters + 1):
        degraded = np.zeros(scenario.n, dtype=bool)
        base = (profile, utilities)
        if params.update_mode is UpdateMode.JACOBI:
            new_p = prices.p.copy()
            for j in range(scenario.n):
                mu = marginal_utility(scenario, j, prices, params,
                                      warm=profile, base=base,
                                      on_diverge="degrade")
                degraded[j] = mu.degraded
                new_p[j] = max(prices.p[j] + params.step_for(j) * mu.value,
                               p_min[j])
        else:
            new_p = prices.p.copy()
            for j in range(scenario.n):
                mixed = PriceVector(new_p.copy())
                mu = marginal_utility(scenario, j, mixed, params,
                                      warm=profile, base=None,
                                      on_diverge="degrade")
                degraded[j] = mu.degraded
                new_p[j] = max(new_p[j] + params.step_for(j) * mu.value,
                               p_min[j])
        prices = PriceVector(new_p)
        res, d_main = _equilibrium(scenario, prices, params, profile,
                                   "degrade")
        degraded |= d_main
        profile = res.profile
        utilities = _osp_utilities(scenario, profile, prices)
        trace.append(IspaIterationRecord(
            iteration=k, prices=prices.p.copy(), utilities=utilities,
            degraded=degraded, profile=profile.alpha.copy()))
    return IspaResult(prices=prices, profile=profile, trace=tuple(trace))


def blind_pricing(scenario, params, p0, p_targets):
    """Linear price ramp from p0 to p_targets, re-solving followers each step.

    Iteration k of max_iters prices at p0 + (k/max_iters)(targets - p0); the
    trace has the same shape as an ISPA run so the two compare directly.
    """
    if params is None:
        params = IspaParams()
    p0 = np.asarray(p0.p if isinstance(p0, PriceVector) else p0, dtype=float)
    p_targets = np.asarray(
        p_targets.p if isinstance(p_targets, PriceVector) else p_targets,
        dtype=float)
    if np.any(p_targets < p0):
        raise ValueError("p_targets must dominate p0 componentwise")

    prices = PriceVector(p0.copy())
    res, degraded0 = _equilibrium(scenario, prices, params, None, "degrade")
    profile = res.profile
    trace = [IspaIterationRecord(
        iteration=0, prices=prices.p.copy(),
        utilities=_osp_utilities(scenario, profile, prices),
        degraded=np.full(scenario.n, degraded0),
        profile=profile.alpha.copy())]
    for k in range(1, params.max_iters + 1):
        frac = k / params.max_iters
        prices = PriceVector(p0 + frac * (p_targets - p0))
        res, d = _equilibrium(scenario, prices, params, profile, "degrade")
        profile = res.profile
        trace.append(IspaIterationRecord(
            iteration=k, prices=prices.p.copy(),
            utilities=_osp_utilities(scenario, profile, prices),
            degraded=np.full(scenario.n, d), profile=profile.alpha.copy()))
    return IspaResult(prices=prices, profile=profile, trace=tuple(trace))
