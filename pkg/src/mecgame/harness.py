"""Scenario generation, experiment recipes and all file interfaces.

Randomness: every drawn quantity gets its own counter-based Philox stream
keyed by (seed, domain, index, parameter slot), so adding devices or OSPs,
or fixing one parameter via an override, never reshuffles any other draw.
Device domain = 1, OSP domain = 2, social-restart domain = 3.

Scenario files are JSON with unit-bearing field names (see
``scenario_to_json``); the loader converts to SI and rejects unknown fields.
"""

import csv
import enum
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .baselines import BaselineKind, SocialOptParams, evaluate_baseline, poa
from .errors import InvalidOverride, ScenarioFormatError
from .games import IpoaParams, ipoa
from .model import (DeviceParams, NetworkParams, OspKind, OspParams,
                    PriceVector, StrategyProfile, SystemScenario)
from .pricing import IspaParams, blind_pricing, ispa
from . import solver as _solver
from . import units

_DOMAIN_DEVICE = 1
_DOMAIN_OSP = 2
_DOMAIN_RESTART = 3

#: Fixed Table-2-style defaults in native units; ranges are drawn uniformly.
DEVICE_DEFAULTS = {
    "lambda_tasks_per_min": 25.0,
    "c_mcycles": 300.0,
    "z_kbits": 500.0,
    "f_md_mhz": (300.0, 450.0),
    "eps_local_w": 0.5,
    "eps_tx_w": (0.1, 1.0),
    "h_db": -50.0,
    "sigma2_service_s2": 0.0,
    "d_max_s": 1.0,
    "e_max_j": 1.0,
    "p_max_usd_per_s": 0.1,
}
OSP_DEFAULTS = {
    "f_osp_ghz": (1.44, 2.9),
    "p_min_usd_per_gcycle": 0.05,
    "amplifiers": 1.0,
}
NETWORK_DEFAULTS = {
    "bandwidth_mhz": 100.0,
    "w0_w": 1e-8,
    "fiber_rate_gbps": 10.0,
    "prop_delay_t_s": 0.0,
}
_DEVICE_SLOTS = {name: k for k, name in enumerate(DEVICE_DEFAULTS)}
_DEVICE_SLOTS["weights"] = len(_DEVICE_SLOTS)
_OSP_SLOTS = {name: k for k, name in enumerate(OSP_DEFAULTS)}

_DEVICE_TO_SI = {
    "lambda_tasks_per_min": units.tasks_per_min_to_si,
    "c_mcycles": units.mcycles_to_si,
    "z_kbits": units.kbits_to_si,
    "f_md_mhz": units.mhz_to_si,
    "eps_local_w": float,
    "eps_tx_w": float,
    "h_db": units.db_to_linear,
    "sigma2_service_s2": float,
    "d_max_s": float,
    "e_max_j": float,
    "p_max_usd_per_s": float,
}


@dataclass(frozen=True)
class ScenarioSpec:
    m: int
    n_cloud: int = 1
    n_edge: int = 3
    seed: int = 0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.n_cloud + self.n_edge < 1:
            raise ValueError("need at least one OSP")


class Recipe(enum.Enum):
    CONVERGENCE_TRACE = "convergence"
    DISUTILITY_VS_LAMBDA = "disutility-vs-lambda"
    DISUTILITY_VS_POWER = "disutility-vs-power"
    PRICE_TRACE = "price-trace"
    UTILITY_TRACE = "utility-trace"
    ISPA_VS_BLIND = "ispa-vs-blind"
    POA_SWEEP = "poa-sweep"


@dataclass(frozen=True)
class ExperimentSpec:
    recipe: Recipe
    scenario: ScenarioSpec
    ipoa: IpoaParams = IpoaParams()
    ispa: IspaParams = IspaParams()
    so: SocialOptParams = SocialOptParams(restarts=4)
    prices_usd_per_gcycle: tuple = None   # default: 0.2 cloud / 0.1 edge
    sweep: tuple = None                   # recipe-specific axis values
    save_profiles: bool = False
    full: bool = False                    # paper-scale budgets
    out_format: str = "csv"               # summary format: csv | jsonl


def _stream(seed, domain, index, slot):
    key = np.uint64((domain << 48) | (index << 16) | slot)
    return np.random.Generator(np.random.Philox(key=np.array(
        [np.uint64(seed), key], dtype=np.uint64)))


def _resolve(value, seed, domain, index, slot, name):
    """Fixed value or [lo, hi] range drawn from the (seed, index) stream."""
    if isinstance(value, (tuple, list, np.ndarray)):
        if len(value) != 2:
            raise InvalidOverride(f"{name}: range must be [lo, hi]")
        lo, hi = float(value[0]), float(value[1])
        if lo > hi:
            raise InvalidOverride(f"{name}: lo > hi")
        if lo == hi:
            return lo
        return float(_stream(seed, domain, index, slot).uniform(lo, hi))
    return float(value)


def generate_scenario(spec):
    """Table-2-style scenario from a seed; deterministic and override-aware."""
    dev_over = {}
    osp_over = {}
    net_over = {}
    weights_fixed = None
    for key, value in spec.overrides.items():
        if key == "weights":
            if (not isinstance(value, (tuple, list)) or len(value) != 3):
                raise InvalidOverride("weights override must be a 3-sequence")
            weights_fixed = tuple(float(v) for v in value)
        elif key in DEVICE_DEFAULTS:
            dev_over[key] = value
        elif key in OSP_DEFAULTS:
            osp_over[key] = value
        elif key in NETWORK_DEFAULTS:
            if isinstance(value, (tuple, list)):
                raise InvalidOverride(f"{key}: network overrides are fixed "
                                      "values, not ranges")
            net_over[key] = value
        else:
            raise InvalidOverride(f"unknown override {key!r}")

    net_vals = dict(NETWORK_DEFAULTS)
    net_vals.update(net_over)
    net = NetworkParams(
        bandwidth_b=units.mhz_to_si(net_vals["bandwidth_mhz"]),
        w0=float(net_vals["w0_w"]),
        fiber_rate_r=units.gbps_to_si(net_vals["fiber_rate_gbps"]),
        prop_delay_t=float(net_vals["prop_delay_t_s"]))

    devices = []
    for i in range(spec.m):
        native = {}
        for name, default in DEVICE_DEFAULTS.items():
            value = dev_over.get(name, default)
            native[name] = _resolve(value, spec.seed, _DOMAIN_DEVICE, i,
                                    _DEVICE_SLOTS[name], name)
        if weights_fixed is not None:
            w = np.asarray(weights_fixed, dtype=float)
        else:
            w = _stream(spec.seed, _DOMAIN_DEVICE, i,
                        _DEVICE_SLOTS["weights"]).uniform(0.0, 1.0, 3)
        w = w / w.sum()
        devices.append(DeviceParams(
            lam=_DEVICE_TO_SI["lambda_tasks_per_min"](
                native["lambda_tasks_per_min"]),
            c=_DEVICE_TO_SI["c_mcycles"](native["c_mcycles"]),
            z=_DEVICE_TO_SI["z_kbits"](native["z_kbits"]),
            f_md=_DEVICE_TO_SI["f_md_mhz"](native["f_md_mhz"]),
            eps_local=native["eps_local_w"],
            eps_tx=native["eps_tx_w"],
            h=_DEVICE_TO_SI["h_db"](native["h_db"]),
            sigma2_service=native["sigma2_service_s2"],
            d_max=native["d_max_s"],
            e_max=native["e_max_j"],
            p_max=native["p_max_usd_per_s"],
            theta_d=float(w[0]), theta_e=float(w[1]), theta_p=float(w[2])))

    osps = []
    for j in range(spec.n_cloud + spec.n_edge):
        native = {}
        for name, default in OSP_DEFAULTS.items():
            value = osp_over.get(name, default)
            native[name] = _resolve(value, spec.seed, _DOMAIN_OSP, j,
                                    _OSP_SLOTS[name], name)
        kind = OspKind.CLOUD if j < spec.n_cloud else OspKind.EDGE
        osps.append(OspParams(
            kind=kind,
            f_osp=units.ghz_to_si(native["f_osp_ghz"]),
            p_min=units.usd_per_gcycle_to_si(native["p_min_usd_per_gcycle"]),
            a=native["amplifiers"]))
    return SystemScenario(devices=devices, osps=osps, net=net)


def default_prices(scenario):
    """0.2 $/Gcycle for cloud OSPs and 0.1 $/Gcycle for edge OSPs."""
    p = np.where([scenario.is_edge(j) for j in range(scenario.n)],
                 units.usd_per_gcycle_to_si(0.1),
                 units.usd_per_gcycle_to_si(0.2))
    return PriceVector(p.astype(float))


# ---------------------------------------------------------------------------
# scenario file schema

def scenario_to_json(scenario):
    devices = []
    for i, d in enumerate(scenario.devices):
        devices.append({
            "lambda_tasks_per_min": d.lam * 60.0,
            "c_mcycles": d.c / 1e6,
            "z_kbits": d.z / 1e3,
            "f_md_mhz": d.f_md / 1e6,
            "eps_local_w": d.eps_local,
            "eps_tx_w": d.eps_tx,
            "h_db": 10.0 * math.log10(d.h),
            "sigma2_service_s2": d.sigma2_service,
            "d_max_s": d.d_max,
            "e_max_j": d.e_max,
            "p_max_usd_per_s": d.p_max,
            "theta_d": d.theta_d,
            "theta_e": d.theta_e,
            "theta_p": d.theta_p,
        })
    osps = []
    for o in scenario.osps:
        osps.append({
            "kind": o.kind.value,
            "f_osp_ghz": o.f_osp / 1e9,
            "p_min_usd_per_gcycle": units.si_to_usd_per_gcycle(o.p_min),
            "amplifiers": o.a,
        })
    return {
        "devices": devices,
        "osps": osps,
        "network": {
            "bandwidth_mhz": scenario.net.bandwidth_b / 1e6,
            "w0_w": scenario.net.w0,
            "fiber_rate_gbps": scenario.net.fiber_rate_r / 1e9,
            "prop_delay_t_s": scenario.net.prop_delay_t,
        },
    }


_DEVICE_FIELDS = set(DEVICE_DEFAULTS) | {"theta_d", "theta_e", "theta_p"}
_OSP_FIELDS = {"kind", "f_osp_ghz", "p_min_usd_per_gcycle", "amplifiers"}
_NETWORK_FIELDS = set(NETWORK_DEFAULTS)


def scenario_from_json(data):
    """Strict loader: unknown fields are rejected, units converted to SI."""
    if not isinstance(data, dict):
        raise ScenarioFormatError("scenario document must be an object")
    unknown = set(data) - {"devices", "osps", "network"}
    if unknown:
        raise ScenarioFormatError(f"unknown top-level fields {sorted(unknown)}")
    for section in ("devices", "osps", "network"):
        if section not in data:
            raise ScenarioFormatError(f"missing section {section!r}")
    devices = []
    for k, entry in enumerate(data["devices"]):
        unknown = set(entry) - _DEVICE_FIELDS
        if unknown:
            raise ScenarioFormatError(
                f"device {k}: unknown fields {sorted(unknown)}")
        missing = _DEVICE_FIELDS - set(entry)
        if missing:
            raise ScenarioFormatError(
                f"device {k}: missing fields {sorted(missing)}")
        devices.append(DeviceParams(
            lam=units.tasks_per_min_to_si(entry["lambda_tasks_per_min"]),
            c=units.mcycles_to_si(entry["c_mcycles"]),
            z=units.kbits_to_si(entry["z_kbits"]),
            f_md=units.mhz_to_si(entry["f_md_mhz"]),
            eps_local=float(entry["eps_local_w"]),
            eps_tx=float(entry["eps_tx_w"]),
            h=units.db_to_linear(entry["h_db"]),
            sigma2_service=float(entry["sigma2_service_s2"]),
            d_max=float(entry["d_max_s"]),
            e_max=float(entry["e_max_j"]),
            p_max=float(entry["p_max_usd_per_s"]),
            theta_d=float(entry["theta_d"]),
            theta_e=float(entry["theta_e"]),
            theta_p=float(entry["theta_p"])))
    osps = []
    for k, entry in enumerate(data["osps"]):
        unknown = set(entry) - _OSP_FIELDS
        if unknown:
            raise ScenarioFormatError(
                f"osp {k}: unknown fields {sorted(unknown)}")
        osps.append(OspParams(
            kind=OspKind(entry["kind"]),
            f_osp=units.ghz_to_si(entry["f_osp_ghz"]),
            p_min=units.usd_per_gcycle_to_si(entry["p_min_usd_per_gcycle"]),
            a=float(entry.get("amplifiers", 1.0))))
    net_entry = data["network"]
    unknown = set(net_entry) - _NETWORK_FIELDS
    if unknown:
        raise ScenarioFormatError(f"network: unknown fields {sorted(unknown)}")
    net = NetworkParams(
        bandwidth_b=units.mhz_to_si(net_entry["bandwidth_mhz"]),
        w0=float(net_entry["w0_w"]),
        fiber_rate_r=units.gbps_to_si(net_entry["fiber_rate_gbps"]),
        prop_delay_t=float(net_entry["prop_delay_t_s"]))
    return SystemScenario(devices=devices, osps=osps, net=net)


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_json(json.load(fh))


def save_scenario(scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_json(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# interior sampling and the validation suite

def sample_interior_profile(scenario, rng, delta_stab=1e-3):
    """Random profile strictly inside the stability constraints C1-C5."""
    m, n = scenario.m, scenario.n
    raw = rng.uniform(0.05, 1.0, size=(m, n))
    raw /= raw.sum(axis=1, keepdims=True)
    scale = rng.uniform(0.1, 0.85, size=(m, 1))
    alpha = raw * scale
    lc = np.array([d.lam * d.c for d in scenario.devices])
    for i, dev in enumerate(scenario.devices):
        s_cap = (1.0 - delta_stab) * scenario.uplink_rates[i] / (dev.lam * dev.z)
        s_i = alpha[i].sum()
        if s_i > 0.9 * s_cap:
            alpha[i] *= 0.9 * s_cap / s_i
    loads = alpha.T @ lc
    for j in range(n):
        if scenario.is_edge(j):
            cap = 0.85 * scenario.osps[j].f_osp
            if loads[j] > cap:
                alpha[:, j] *= cap / loads[j]
    return StrategyProfile(alpha)


def validate_scenario(scenario, prices=None, seed=0, points=40,
                      grad_tol=1e-5, hess_tol=1e-4, eig_tol=-1e-9):
    """Finite-difference and curvature checks at random interior points.

    Returns a dict with the worst observed errors and a boolean "passed".
    """
    from .model import disutility

    if prices is None:
        prices = default_prices(scenario)
    rng = np.random.Generator(np.random.Philox(key=np.array(
        [np.uint64(seed), np.uint64(0xC0FFEE)], dtype=np.uint64)))
    worst_grad = 0.0
    worst_hess = 0.0
    min_eig = math.inf
    step = 1e-6
    for _ in range(points):
        profile = sample_interior_profile(scenario, rng)
        i = int(rng.integers(0, scenario.m))
        grad = _solver.grad_disutility(scenario, i, profile, prices).g
        fd = np.zeros(scenario.n)
        for j in range(scenario.n):
            up = profile.alpha.copy()
            dn = profile.alpha.copy()
            up[i, j] += step
            dn[i, j] -= step
            fd[j] = (disutility(scenario, i, StrategyProfile(up), prices)
                     - disutility(scenario, i, StrategyProfile(dn), prices)) \
                / (2.0 * step)
        err = float(np.max(np.abs(grad - fd)) / (1.0 + np.max(np.abs(grad))))
        worst_grad = max(worst_grad, err)

        hess = _solver.hessian_disutility(scenario, i, profile).h
        fdh = np.zeros_like(hess)
        hstep = 2e-5
        for j in range(scenario.n):
            up = profile.alpha.copy()
            dn = profile.alpha.copy()
            up[i, j] += hstep
            dn[i, j] -= hstep
            gp = _solver.grad_disutility(scenario, i, StrategyProfile(up),
                                         prices).g
            gm = _solver.grad_disutility(scenario, i, StrategyProfile(dn),
                                         prices).g
            fdh[j] = (gp - gm) / (2.0 * hstep)
        fdh = 0.5 * (fdh + fdh.T)
        herr = float(np.max(np.abs(hess - fdh)) / (1.0 + np.max(np.abs(hess))))
        worst_hess = max(worst_hess, herr)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(hess).min()))
    passed = (worst_grad <= grad_tol and worst_hess <= hess_tol
              and min_eig >= eig_tol)
    return {"passed": passed, "worst_grad_rel_err": worst_grad,
            "worst_hess_rel_err": worst_hess, "min_hessian_eigenvalue": min_eig,
            "points": points}


# ---------------------------------------------------------------------------
# experiment recipes

def _out_dir(spec_out):
    out = os.environ.get("MECGAME_OUT_DIR") or spec_out
    os.makedirs(out, exist_ok=True)
    return out


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_summary(path_base, header, rows, out_format):
    if out_format == "jsonl":
        path = path_base + ".jsonl"
        _write_jsonl(path, [dict(zip(header, row)) for row in rows])
    else:
        path = path_base + ".csv"
        _write_csv(path, header, rows)
    return path


def _spec_dict(spec):
    """Fully-resolved experiment spec for the manifest (defaults echoed)."""
    return {
        "recipe": spec.recipe.value,
        "scenario": {
            "m": spec.scenario.m,
            "n_cloud": spec.scenario.n_cloud,
            "n_edge": spec.scenario.n_edge,
            "seed": spec.scenario.seed,
            "overrides": spec.scenario.overrides,
        },
        "ipoa": {
            "tau": spec.ipoa.tau,
            "sigma_conv": spec.ipoa.sigma_conv,
            "max_outer_iters": spec.ipoa.max_outer_iters,
            "centroid_mode": spec.ipoa.centroid_mode.value,
            "momentum": spec.ipoa.momentum,
            "accept_tol": spec.ipoa.accept_tol,
            "solver": {
                "barrier_t0": spec.ipoa.solver.barrier_t0,
                "barrier_mu": spec.ipoa.solver.barrier_mu,
                "tol_kkt": spec.ipoa.solver.tol_kkt,
                "max_newton_iters": spec.ipoa.solver.max_newton_iters,
                "delta_stab": spec.ipoa.solver.delta_stab,
            },
        },
        "ispa": {
            "delta_step": (list(np.atleast_1d(spec.ispa.delta_step))
                           if not np.isscalar(spec.ispa.delta_step)
                           else spec.ispa.delta_step),
            "eta": spec.ispa.eta,
            "max_iters": spec.ispa.max_iters,
            "update_mode": spec.ispa.update_mode.value,
        },
        "so": {"restarts": spec.so.restarts, "seed": spec.so.seed,
               "maxiter": spec.so.maxiter,
               "delta_stab": spec.so.delta_stab},
        "prices_usd_per_gcycle": (list(spec.prices_usd_per_gcycle)
                                  if spec.prices_usd_per_gcycle else None),
        "sweep": list(spec.sweep) if spec.sweep else None,
        "save_profiles": spec.save_profiles,
        "full": spec.full,
        "out_format": spec.out_format,
    }


def _prices_for(spec, scenario):
    if spec.prices_usd_per_gcycle is not None:
        vals = [units.usd_per_gcycle_to_si(v)
                for v in spec.prices_usd_per_gcycle]
        if len(vals) != scenario.n:
            raise ValueError("prices list length must equal the OSP count")
        return PriceVector(np.array(vals))
    return default_prices(scenario)


#: Trace devices of the convergence recipe; the published figure labels
#: devices 5,15,25,35,45 in 1-based indexing, stored 0-based here.
CONVERGENCE_TRACE_DEVICES = (4, 14, 24, 34, 44)


def run_experiment(spec, out_dir):
    """Execute one recipe; writes traces, a summary and manifest.json.

    Returns (output paths, failures).  Per-point failures are recorded in
    the manifest rather than aborting the whole sweep.
    """
    out = _out_dir(out_dir)
    outputs = []
    failures = []
    recipe = spec.recipe

    if recipe is Recipe.CONVERGENCE_TRACE:
        scenario = generate_scenario(spec.scenario)
        prices = _prices_for(spec, scenario)
        result = ipoa(scenario, prices, spec.ipoa)
        trace_path = os.path.join(out, "ipoa_trace.jsonl")
        _write_jsonl(trace_path, result.trace.records(spec.save_profiles))
        outputs.append(trace_path)
        picked = [i for i in CONVERGENCE_TRACE_DEVICES if i < scenario.m]
        header = ["round"] + [f"disutility_md{i:02d}" for i in picked]
        rows = []
        for rec in result.trace.rounds:
            rows.append([rec.round] + [float(rec.per_device_disutility[i])
                                       for i in picked])
        outputs.append(_write_summary(os.path.join(out, "convergence"),
                                      header, rows, spec.out_format))
        if not result.converged:
            failures.append(f"ipoa did not converge: {result.failure}")

    elif recipe in (Recipe.DISUTILITY_VS_LAMBDA, Recipe.DISUTILITY_VS_POWER):
        if recipe is Recipe.DISUTILITY_VS_LAMBDA:
            axis_name = "lambda_tasks_per_min"
            values = spec.sweep or tuple(range(20, 30))
        else:
            axis_name = "eps_tx_w"
            values = spec.sweep or tuple(round(0.1 * k, 1)
                                         for k in range(1, 11))
        header = [axis_name, "ipoa_mean_disutility",
                  "socially_optimal_mean_disutility",
                  "local_only_mean_disutility", "cloud_only_mean_disutility",
                  "evenly_mean_disutility", "excluded_schemes"]
        rows = []
        for value in values:
            over = dict(spec.scenario.overrides)
            over[axis_name] = value
            scen_spec = replace(spec.scenario, overrides=over)
            try:
                scenario = generate_scenario(scen_spec)
                prices = _prices_for(spec, scenario)
                report = poa(scenario, prices, spec.ipoa, spec.so)
                excluded = []
                row = [value, report.avg_ne, report.avg_so]
                for kind in (BaselineKind.LOCAL_ONLY, BaselineKind.CLOUD_ONLY,
                             BaselineKind.EVENLY):
                    val, feasible, _ = evaluate_baseline(scenario, kind,
                                                         prices)
                    row.append(val if feasible else math.inf)
                    if not feasible:
                        excluded.append(kind.value)
                row.append(";".join(excluded))
                rows.append(row)
            except Exception as exc:   # recorded, sweep continues
                failures.append(f"{axis_name}={value}: {exc}")
        outputs.append(_write_summary(os.path.join(out, recipe.value.replace("-", "_")),
                                      header, rows, spec.out_format))

    elif recipe in (Recipe.PRICE_TRACE, Recipe.UTILITY_TRACE):
        m_values = spec.sweep or ((10, 30, 50, 70, 90) if spec.full
                                  else (10, 50, 90))
        params = spec.ispa
        if spec.full:
            params = replace(params, max_iters=max(params.max_iters, 50))
        for m in m_values:
            scen_spec = replace(spec.scenario, m=int(m))
            try:
                scenario = generate_scenario(scen_spec)
                result = ispa(scenario, params)
                trace_path = os.path.join(out, f"ispa_trace_m{int(m):03d}.jsonl")
                _write_jsonl(trace_path, result.records(spec.save_profiles))
                outputs.append(trace_path)
                if recipe is Recipe.PRICE_TRACE:
                    header = ["iter"] + [
                        f"price_osp{j}_usd_per_gcycle"
                        for j in range(scenario.n)]
                    rows = [[rec.iteration]
                            + [units.si_to_usd_per_gcycle(v)
                               for v in rec.prices]
                            for rec in result.trace]
                else:
                    header = ["iter"] + [
                        f"utility_osp{j}_usd_per_s"
                        for j in range(scenario.n)]
                    rows = [[rec.iteration] + [float(v)
                                               for v in rec.utilities]
                            for rec in result.trace]
                outputs.append(_write_summary(
                    os.path.join(out, f"{recipe.value.replace('-', '_')}_m{int(m):03d}"),
                    header, rows, spec.out_format))
            except Exception as exc:
                failures.append(f"m={m}: {exc}")

    elif recipe is Recipe.ISPA_VS_BLIND:
        scenario = generate_scenario(spec.scenario)
        params = spec.ispa
        if spec.full:
            params = replace(params, max_iters=max(params.max_iters, 50))
        result = ispa(scenario, params)
        mean_final = float(np.mean(result.trace[-1].prices))
        p0 = PriceVector(scenario.p_min_array().copy())
        targets = np.maximum(np.full(scenario.n, mean_final), p0.p)
        blind = blind_pricing(scenario, params, p0, targets)
        trace_path = os.path.join(out, "ispa_trace.jsonl")
        _write_jsonl(trace_path, result.records(spec.save_profiles))
        outputs.append(trace_path)
        blind_path = os.path.join(out, "blind_trace.jsonl")
        _write_jsonl(blind_path, blind.records(spec.save_profiles))
        outputs.append(blind_path)
        header = ["iter", "ispa_mean_utility_usd_per_s",
                  "blind_mean_utility_usd_per_s",
                  "ispa_mean_price_usd_per_gcycle",
                  "blind_mean_price_usd_per_gcycle"]
        rows = []
        for rec_a, rec_b in zip(result.trace, blind.trace):
            rows.append([rec_a.iteration,
                         float(np.mean(rec_a.utilities)),
                         float(np.mean(rec_b.utilities)),
                         units.si_to_usd_per_gcycle(float(np.mean(rec_a.prices))),
                         units.si_to_usd_per_gcycle(float(np.mean(rec_b.prices)))])
        outputs.append(_write_summary(os.path.join(out, "ispa_vs_blind"),
                                      header, rows, spec.out_format))

    elif recipe is Recipe.POA_SWEEP:
        values = spec.sweep or tuple(range(20, 30))
        header = ["lambda_tasks_per_min", "poa", "avg_ne_disutility",
                  "avg_so_disutility"]
        rows = []
        for value in values:
            over = dict(spec.scenario.overrides)
            over["lambda_tasks_per_min"] = value
            scen_spec = replace(spec.scenario, overrides=over)
            try:
                scenario = generate_scenario(scen_spec)
                prices = _prices_for(spec, scenario)
                report = poa(scenario, prices, spec.ipoa, spec.so)
                rows.append([value, report.poa, report.avg_ne, report.avg_so])
            except Exception as exc:
                failures.append(f"lambda={value}: {exc}")
        outputs.append(_write_summary(os.path.join(out, "poa_sweep"),
                                      header, rows, spec.out_format))
    else:
        raise ValueError(f"unknown recipe {recipe}")

    manifest = {
        "version": __version__,
        "seed": spec.scenario.seed,
        "spec": _spec_dict(spec),
        "outputs": [os.path.basename(p) for p in outputs],
        "failures": failures,
    }
    manifest_path = os.path.join(out, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(manifest_path)
    return outputs, failures
