import math

import numpy as np
import pytest

from mecgame.model import (DeviceParams, NetworkParams, OspKind, OspParams,
                           PriceVector, StrategyProfile, SystemScenario)


def make_device(lam_min=25.0, c_mcycles=300.0, z_kbits=500.0, f_md_mhz=360.0,
                eps_local=0.5, eps_tx=0.4, h=1e-5, sigma2=0.0, d_max=1.0,
                e_max=1.0, p_max=0.1, theta=(0.4, 0.3, 0.3)):
    return DeviceParams(
        lam=lam_min / 60.0, c=c_mcycles * 1e6, z=z_kbits * 1e3,
        f_md=f_md_mhz * 1e6, eps_local=eps_local, eps_tx=eps_tx, h=h,
        sigma2_service=sigma2, d_max=d_max, e_max=e_max, p_max=p_max,
        theta_d=theta[0], theta_e=theta[1], theta_p=theta[2])


def make_scenario(devices, osp_kinds_f, p_min_gc=0.05):
    """osp_kinds_f: sequence of (kind, f_osp_ghz)."""
    osps = [OspParams(kind=kind, f_osp=f * 1e9, p_min=p_min_gc * 1e-9, a=1.0)
            for kind, f in osp_kinds_f]
    net = NetworkParams(bandwidth_b=1e8, w0=1e-8, fiber_rate_r=1e10,
                        prop_delay_t=0.0)
    return SystemScenario(devices=devices, osps=osps, net=net)


def prices_gc(*values):
    """PriceVector from $/Gcycle values."""
    return PriceVector(np.array([v * 1e-9 for v in values]))


@pytest.fixture
def small_scenario():
    """3 devices, 1 cloud + 2 edge; fixed parameters."""
    devices = [
        make_device(f_md_mhz=360.0, theta=(0.4, 0.3, 0.3)),
        make_device(f_md_mhz=420.0, eps_tx=0.7, theta=(0.5, 0.25, 0.25)),
        make_device(f_md_mhz=330.0, eps_tx=0.55, theta=(0.2, 0.4, 0.4)),
    ]
    return make_scenario(devices, [(OspKind.CLOUD, 2.0), (OspKind.EDGE, 1.8),
                                   (OspKind.EDGE, 2.5)])


@pytest.fixture
def small_prices():
    return prices_gc(0.2, 0.1, 0.1)


def interior_profile(scenario, rng, max_total=0.8):
    """Random strictly-stable profile for derivative tests."""
    m, n = scenario.m, scenario.n
    raw = rng.uniform(0.05, 1.0, size=(m, n))
    raw /= raw.sum(axis=1, keepdims=True)
    alpha = raw * rng.uniform(0.1, max_total, size=(m, 1))
    lc = np.array([d.lam * d.c for d in scenario.devices])
    loads = alpha.T @ lc
    for j in range(n):
        if scenario.is_edge(j):
            cap = 0.8 * scenario.osps[j].f_osp
            if loads[j] > cap:
                alpha[:, j] *= cap / loads[j]
    return StrategyProfile(alpha)


# --------------------------------------------------------------------------
# Independent transcription of the cost chain, used as the oracle side of
# the dual-route checks.  Written in vectorized numpy on purpose: it shares
# no code path with the package implementation.

def oracle_rate(scenario, i):
    dev = scenario.devices[i]
    inter = scenario.net.w0 + sum(d.eps_tx * d.h
                                  for k, d in enumerate(scenario.devices)
                                  if k != i)
    return scenario.net.bandwidth_b * np.log2(1 + dev.eps_tx * dev.h / inter)


def oracle_costs(scenario, i, alpha, prices):
    """(delay, energy, payment, disutility) for device i at joint profile."""
    dev = scenario.devices[i]
    row = np.asarray(alpha[i], dtype=float)
    frac = row.sum()
    r = oracle_rate(scenario, i)
    sbar2 = dev.sigma2_service + (dev.z / r) ** 2

    local_rate_left = dev.f_md - (1 - frac) * dev.lam * dev.c
    d_local = dev.c / local_rate_left
    e_local = dev.eps_local * dev.c / local_rate_left

    rho_w = dev.lam * dev.z * frac / r
    d_wireless = dev.lam * sbar2 * frac / (2 * (1 - rho_w)) + dev.z / r
    e_tx = dev.eps_tx * d_wireless

    u_all = np.array([d.lam * d.c for d in scenario.devices])
    server_load = np.asarray(alpha).T @ u_all
    d_server = np.empty(scenario.n)
    d_wired = np.empty(scenario.n)
    for j, osp in enumerate(scenario.osps):
        if osp.kind is OspKind.CLOUD:
            d_server[j] = dev.c / osp.f_osp
            d_wired[j] = osp.a * dev.z / scenario.net.fiber_rate_r \
                + scenario.net.prop_delay_t
        else:
            d_server[j] = dev.c / (osp.f_osp - server_load[j])
            d_wired[j] = 0.0

    delay = (1 - frac) * d_local \
        + float(row @ (d_wireless + d_wired + d_server))
    energy = (1 - frac) * e_local + frac * e_tx
    payment = float(row @ np.asarray(prices.p)) * dev.c * dev.lam
    score = (dev.theta_d * delay / dev.d_max
             + dev.theta_e * energy / dev.e_max
             + dev.theta_p * payment / dev.p_max)
    return delay, energy, payment, score


def oracle_leader_condition(scenario, i):
    """Independent transcription of the price-equilibrium condition."""
    dev = scenario.devices[i]
    r = oracle_rate(scenario, i)
    sbar2 = dev.sigma2_service + (dev.z / r) ** 2
    common = dev.p_max / (dev.theta_p * dev.lam * dev.c) \
        if dev.theta_p > 0 else math.inf
    pi = common * (dev.theta_d / dev.d_max
                   + dev.theta_e * dev.eps_local / dev.e_max)
    cap = common * (dev.theta_d / dev.d_max
                    + dev.theta_e * dev.eps_tx / dev.e_max)
    gap = dev.f_md - dev.lam * dev.c
    lhs = 2 * pi * (dev.c ** 3 / gap ** 3 + dev.lam * dev.c ** 4 / gap ** 5)
    rhs = cap * sbar2 * dev.z / r
    return pi, cap, lhs, rhs, lhs <= rhs
