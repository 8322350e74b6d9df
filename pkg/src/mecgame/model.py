"""Domain types and the closed-form cost/utility model.

All quantities are SI-normalized: tasks/second, cycles, bits, cycles/second,
watts, joules, seconds, dollars/cycle, dollars/second.  Conversion from the
native units used in scenario files happens in :mod:`mecgame.harness`.

Conventions:

* The offloading profile is an M x N matrix ``alpha``; row i sums to at most
  1 and the remainder ``1 - sum(alpha[i])`` is computed locally.
* OSPs are ordered cloud-first.  Cloud centers are modeled as load-independent
  (infinite-server) queues, so the server stability constraint C5 applies to
  edge servers only; edge servers are single queues whose delay grows with the
  total load routed to them.
* The local CPU and the wireless interface are single queues, so devices carry
  their own stability constraints (C3, C4).
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StabilityViolation

WEIGHT_SUM_TOL = 1e-12

#: Default stability margin: utilizations are kept <= 1 - DELTA_STAB so the
#: feasible set is closed (the strict "< 1" of the queueing model is open).
DELTA_STAB = 1e-4


class OspKind(enum.Enum):
    CLOUD = "cloud"
    EDGE = "edge"


@dataclass(frozen=True)
class DeviceParams:
    """Parameters of one mobile device (all SI)."""

    lam: float          # task arrival rate, tasks/s
    c: float            # mean CPU cycles per task
    z: float            # mean input size per task, bits
    f_md: float         # local CPU rate, cycles/s
    eps_local: float    # local computing power, W
    eps_tx: float       # transmission power, W
    h: float            # linear channel gain
    sigma2_service: float  # variance of wireless service time, s^2
    d_max: float        # max acceptable delay, s
    e_max: float        # max acceptable energy, J
    p_max: float        # max acceptable payment rate, $/s
    theta_d: float
    theta_e: float
    theta_p: float

    def __post_init__(self):
        for name in ("lam", "c", "z", "f_md", "eps_local", "eps_tx", "h",
                     "d_max", "e_max", "p_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"DeviceParams.{name} must be > 0")
        if self.sigma2_service < 0:
            raise ValueError("DeviceParams.sigma2_service must be >= 0")
        for name in ("theta_d", "theta_e", "theta_p"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"DeviceParams.{name} must lie in [0, 1]")
        if abs(self.theta_d + self.theta_e + self.theta_p - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError("weight factors must sum to 1")
        if not self.lam * self.c < self.f_md:
            raise ValueError("local queue unstable even with no offloading "
                             "(lam * c must be < f_md)")


@dataclass(frozen=True)
class OspParams:
    """Parameters of one offloading service provider (SI)."""

    kind: OspKind
    f_osp: float        # server service rate, cycles/s
    p_min: float = 0.0  # minimum (cost) price, $/cycle
    a: float = 1.0      # optical amplifier count (cloud only, ignored for edge)

    def __post_init__(self):
        if not self.f_osp > 0:
            raise ValueError("OspParams.f_osp must be > 0")
        if self.p_min < 0:
            raise ValueError("OspParams.p_min must be >= 0")
        if self.a < 0:
            raise ValueError("OspParams.a must be >= 0")


@dataclass(frozen=True)
class NetworkParams:
    """Shared radio and backbone constants (SI)."""

    bandwidth_b: float      # wireless bandwidth, Hz
    w0: float               # background interference power, W
    fiber_rate_r: float     # backbone uplink rate, bits/s
    prop_delay_t: float     # backbone propagation delay, s

    def __post_init__(self):
        if not self.bandwidth_b > 0:
            raise ValueError("NetworkParams.bandwidth_b must be > 0")
        if not self.fiber_rate_r > 0:
            raise ValueError("NetworkParams.fiber_rate_r must be > 0")
        if self.w0 < 0 or self.prop_delay_t < 0:
            raise ValueError("NetworkParams.w0 and prop_delay_t must be >= 0")


@dataclass(frozen=True)
class SystemScenario:
    """Immutable description of all devices, OSPs and network constants."""

    devices: tuple
    osps: tuple
    net: NetworkParams
    # Derived, filled in __post_init__: uplink rate and wireless service
    # second moment per device (both depend only on the device population).
    uplink_rates: tuple = field(init=False, repr=False)
    s2bar: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        object.__setattr__(self, "osps", tuple(self.osps))
        if len(self.devices) < 1 or len(self.osps) < 1:
            raise ValueError("need at least one device and one OSP")
        seen_edge = False
        for osp in self.osps:
            if osp.kind is OspKind.EDGE:
                seen_edge = True
            elif seen_edge:
                raise ValueError("cloud OSPs must precede edge OSPs")
        rates = tuple(_uplink_rate(self.devices, self.net, i)
                      for i in range(len(self.devices)))
        if any(not r > 0 for r in rates):
            raise ValueError("every device needs a positive uplink rate")
        s2 = tuple(d.sigma2_service + (d.z / r) ** 2
                   for d, r in zip(self.devices, rates))
        object.__setattr__(self, "uplink_rates", rates)
        object.__setattr__(self, "s2bar", s2)

    @property
    def m(self):
        return len(self.devices)

    @property
    def n(self):
        return len(self.osps)

    @property
    def n_cloud(self):
        return sum(1 for o in self.osps if o.kind is OspKind.CLOUD)

    @property
    def n_edge(self):
        return self.n - self.n_cloud

    def is_edge(self, j):
        return self.osps[j].kind is OspKind.EDGE

    def wired_delay(self, i, j):
        """Backbone delay for device i's tasks on OSP j (0 for edge)."""
        osp = self.osps[j]
        if osp.kind is OspKind.CLOUD:
            return osp.a * self.devices[i].z / self.net.fiber_rate_r + self.net.prop_delay_t
        return 0.0

    def p_min_array(self):
        return np.array([o.p_min for o in self.osps], dtype=float)


@dataclass
class StrategyProfile:
    """M x N matrix of offloading probabilities."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 2:
            raise ValueError("alpha must be a 2-D matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("alpha must be finite")
        self.alpha = a

    @classmethod
    def zeros(cls, m, n):
        return cls(np.zeros((m, n)))

    def copy(self):
        return StrategyProfile(self.alpha.copy())


@dataclass
class PriceVector:
    """Per-OSP unit prices, $/cycle."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1:
            raise ValueError("p must be a 1-D vector")
        if not np.all(np.isfinite(p)):
            raise ValueError("p must be finite")
        self.p = p

    def copy(self):
        return PriceVector(self.p.copy())


@dataclass(frozen=True)
class CostBreakdown:
    """Per-device expected costs at a given profile and price vector."""

    rate_r: float       # uplink rate, bits/s
    delay: float        # expected per-task delay, s
    energy: float       # expected per-task energy, J
    payment: float      # expected payment rate, $/s
    disutility: float   # weighted normalized score


@dataclass(frozen=True)
class FeasibilityMargins:
    """Tolerances used by :func:`check_feasible`.

    ``delta_stab`` shrinks the stability constraints C3-C5 to utilization
    <= 1 - delta_stab; ``bound_tol`` is the absolute slack on the box/simplex
    constraints C1-C2; ``cap_tol`` is the relative slack on the caps C6-C8.
    """

    delta_stab: float = DELTA_STAB
    bound_tol: float = 1e-9
    cap_tol: float = 0.0


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple   # of (tag, index, margin); index is the device for
                        # C1-C4/C6-C8 and the OSP for C5


def _uplink_rate(devices, net, i):
    interference = net.w0
    for k, dev in enumerate(devices):
        if k != i:
            interference += dev.eps_tx * dev.h
    dev = devices[i]
    return net.bandwidth_b * math.log2(1.0 + dev.eps_tx * dev.h / interference)


def uplink_rate(scenario, i):
    """Shannon uplink rate of device i against the full device population."""
    return scenario.uplink_rates[i]


def osp_loads(scenario, profile):
    """Total load routed to each OSP, cycles/s (length-N array)."""
    u = np.array([d.lam * d.c for d in scenario.devices])
    return profile.alpha.T @ u


def local_utilization(dev, s):
    """Local CPU utilization of a device offloading total fraction s."""
    return (1.0 - s) * dev.lam * dev.c / dev.f_md


def wireless_utilization(scenario, i, s):
    """Wireless interface utilization of device i at total offload s."""
    dev = scenario.devices[i]
    return dev.lam * dev.z * s / scenario.uplink_rates[i]


def cost_breakdown(scenario, i, profile, prices):
    """Expected delay, energy, payment and disutility of device i.

    The delay composes the local single-queue delay, the wireless
    transfer delay (Pollaczek-Khinchine waiting time plus service time),
    the backbone delay for cloud OSPs, and the server computation delay.
    Raises :class:`StabilityViolation` if any involved queue is saturated.
    """
    dev = scenario.devices[i]
    alpha_i = profile.alpha[i]
    r = scenario.uplink_rates[i]
    s2 = scenario.s2bar[i]
    s = float(np.sum(alpha_i))

    util3 = local_utilization(dev, s)
    if util3 >= 1.0:
        raise StabilityViolation("C3", i, util3)
    util4 = wireless_utilization(scenario, i, s)
    if util4 >= 1.0:
        raise StabilityViolation("C4", i, util4)

    loads = osp_loads(scenario, profile)
    d_local = dev.c / (dev.f_md - (1.0 - s) * dev.lam * dev.c)
    d_tx = dev.lam * s2 * s / (2.0 * (1.0 - util4)) + dev.z / r

    delay = (1.0 - s) * d_local + s * d_tx
    for j in range(scenario.n):
        if scenario.is_edge(j):
            if alpha_i[j] == 0.0:
                continue
            util5 = loads[j] / scenario.osps[j].f_osp
            if util5 >= 1.0:
                raise StabilityViolation("C5", j, util5)
            d_off = dev.c / (scenario.osps[j].f_osp - loads[j])
        else:
            d_off = dev.c / scenario.osps[j].f_osp
        delay += alpha_i[j] * (scenario.wired_delay(i, j) + d_off)

    energy = (1.0 - s) * dev.eps_local * d_local + s * dev.eps_tx * d_tx
    payment = dev.lam * dev.c * float(np.dot(alpha_i, prices.p))
    score = (dev.theta_d * delay / dev.d_max
             + dev.theta_e * energy / dev.e_max
             + dev.theta_p * payment / dev.p_max)
    return CostBreakdown(rate_r=r, delay=delay, energy=energy,
                         payment=payment, disutility=score)


def disutility(scenario, i, profile, prices):
    """Weighted normalized cost score of device i (lower is better)."""
    return cost_breakdown(scenario, i, profile, prices).disutility


def mean_disutility(scenario, profile, prices):
    """Average disutility over all devices."""
    total = 0.0
    for i in range(scenario.m):
        total += disutility(scenario, i, profile, prices)
    return total / scenario.m


def osp_utility(scenario, j, profile, prices):
    """Revenue rate of OSP j, $/s: price times total load routed to it."""
    load = 0.0
    for k, dev in enumerate(scenario.devices):
        load += dev.lam * dev.c * profile.alpha[k, j]
    return prices.p[j] * load


def check_feasible(scenario, profile, prices, margins=None, include_caps=True):
    """Evaluate constraints C1-C8 for every device; reports, never throws.

    C5 is evaluated per edge OSP (cloud centers are load-independent).
    C6-C8 are skipped for a device whose cost cannot be evaluated because a
    stability constraint is saturated (the saturation itself is reported).
    """
    if margins is None:
        margins = FeasibilityMargins()
    alpha = profile.alpha
    violations = []
    stab_cap = 1.0 - margins.delta_stab
    loads = osp_loads(scenario, profile)

    edge_saturated = set()
    for j in range(scenario.n):
        if not scenario.is_edge(j):
            continue
        util5 = loads[j] / scenario.osps[j].f_osp
        if util5 > stab_cap:
            violations.append(("C5", j, util5 - stab_cap))
        if util5 >= 1.0:
            edge_saturated.add(j)

    for i in range(scenario.m):
        dev = scenario.devices[i]
        row = alpha[i]
        s = float(np.sum(row))
        if s < -margins.bound_tol or s > 1.0 + margins.bound_tol:
            violations.append(("C1", i, max(-s, s - 1.0)))
        for j in range(scenario.n):
            if row[j] < -margins.bound_tol or row[j] > 1.0 + margins.bound_tol:
                violations.append(("C2", i, max(-row[j], row[j] - 1.0)))
                break
        util3 = local_utilization(dev, s)
        if util3 > stab_cap:
            violations.append(("C3", i, util3 - stab_cap))
        util4 = wireless_utilization(scenario, i, s)
        if util4 > stab_cap:
            violations.append(("C4", i, util4 - stab_cap))

        if not include_caps:
            continue
        computable = (util3 < 1.0 and util4 < 1.0
                      and not any(row[j] > 0 for j in edge_saturated))
        if not computable:
            continue
        costs = cost_breakdown(scenario, i, profile, prices)
        if costs.delay > dev.d_max * (1.0 + margins.cap_tol):
            violations.append(("C6", i, costs.delay - dev.d_max))
        if costs.energy > dev.e_max * (1.0 + margins.cap_tol):
            violations.append(("C7", i, costs.energy - dev.e_max))
        if costs.payment > dev.p_max * (1.0 + margins.cap_tol):
            violations.append(("C8", i, costs.payment - dev.p_max))

    return FeasibilityReport(feasible=not violations, violations=tuple(violations))
