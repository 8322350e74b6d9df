"""Command-line interface.

Exit codes: 0 success, 1 runtime failure (including partial sweep
failures), 2 usage or configuration errors.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, units
from .baselines import BaselineKind, SocialOptParams, evaluate_baseline, poa
from .errors import MecGameError, ScenarioFormatError, InvalidOverride
from .games import IpoaParams, ipoa, verify_ne
from .harness import (ExperimentSpec, Recipe, ScenarioSpec, default_prices,
                      generate_scenario, load_scenario, run_experiment,
                      save_scenario, validate_scenario, _out_dir,
                      _write_jsonl, _write_summary)
from .model import PriceVector
from .pricing import IspaParams, ispa


class UsageError(Exception):
    pass


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", default="runs/out", help="output directory")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--m", type=int, default=50)
    parser.add_argument("--n-cloud", type=int, default=1)
    parser.add_argument("--n-edge", type=int, default=3)
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="scenario override, e.g. eps_tx_w=0.4 or "
                             "lambda_tasks_per_min=20,29")
    parser.add_argument("--prices", help="comma list, $/Gcycle per OSP")
    parser.add_argument("--scenario-file", help="load scenario JSON instead "
                                                "of generating one")


def _parse_override(text):
    if "=" not in text:
        raise UsageError(f"override {text!r} is not KEY=VALUE")
    key, raw = text.split("=", 1)
    parts = raw.split(",")
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"override {text!r}: {exc}") from None
    return key, (values[0] if len(values) == 1 else values)


def _load_config(path):
    if not os.path.exists(path):
        raise UsageError(f"config file {path!r} does not exist")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path!r} is not valid JSON: {exc}")


def _scenario_spec(args, config):
    cfg = config.get("scenario", {}) if config else {}
    unknown = set(cfg) - {"m", "n_cloud", "n_edge", "seed", "overrides"}
    if unknown:
        raise UsageError(f"config scenario: unknown keys {sorted(unknown)}")
    overrides = dict(cfg.get("overrides", {}))
    for text in args.override:
        key, value = _parse_override(text)
        overrides[key] = value
    return ScenarioSpec(
        m=int(cfg.get("m", args.m)),
        n_cloud=int(cfg.get("n_cloud", args.n_cloud)),
        n_edge=int(cfg.get("n_edge", args.n_edge)),
        seed=int(cfg.get("seed", args.seed)),
        overrides=overrides)


def _scenario_and_prices(args, config):
    if args.scenario_file:
        scenario = load_scenario(args.scenario_file)
    else:
        scenario = generate_scenario(_scenario_spec(args, config))
    price_text = args.prices or (config or {}).get("prices_usd_per_gcycle")
    if price_text is None:
        prices = default_prices(scenario)
    else:
        if isinstance(price_text, str):
            values = [float(v) for v in price_text.split(",")]
        else:
            values = [float(v) for v in price_text]
        if len(values) != scenario.n:
            raise UsageError("--prices length must equal the OSP count")
        prices = PriceVector(np.array(
            [units.usd_per_gcycle_to_si(v) for v in values]))
    return scenario, prices


def _cmd_generate(args, config):
    scenario = generate_scenario(_scenario_spec(args, config))
    out = _out_dir(args.out)
    path = os.path.join(out, "scenario.json")
    save_scenario(scenario, path)
    if not args.quiet:
        print(path)
    return 0


def _cmd_ipoa(args, config):
    scenario, prices = _scenario_and_prices(args, config)
    params = IpoaParams(max_outer_iters=args.max_rounds)
    result = ipoa(scenario, prices, params)
    out = _out_dir(args.out)
    trace_path = os.path.join(out, "ipoa_trace.jsonl")
    _write_jsonl(trace_path, result.trace.records(args.save_profiles))
    header = ["round", "frobenius_delta", "mean_disutility"]
    rows = [[rec.round,
             "" if np.isnan(rec.frobenius_delta) else rec.frobenius_delta,
             float(np.mean(rec.per_device_disutility))]
            for rec in result.trace.rounds]
    _write_summary(os.path.join(out, "ipoa_summary"), header, rows,
                   args.format)
    if not args.quiet:
        print(f"converged={result.converged} rounds={result.iterations}")
    return 0 if result.converged else 1


def _cmd_ispa(args, config):
    scenario, prices = _scenario_and_prices(args, config)
    params = IspaParams(max_iters=args.iters,
                        ipoa=IpoaParams(max_outer_iters=args.max_rounds))
    result = ispa(scenario, params,
                  None if args.prices is None else prices)
    out = _out_dir(args.out)
    trace_path = os.path.join(out, "ispa_trace.jsonl")
    _write_jsonl(trace_path, result.records(args.save_profiles))
    header = (["iter"]
              + [f"price_osp{j}_usd_per_gcycle" for j in range(scenario.n)]
              + [f"utility_osp{j}_usd_per_s" for j in range(scenario.n)])
    rows = []
    for rec in result.trace:
        rows.append([rec.iteration]
                    + [units.si_to_usd_per_gcycle(v) for v in rec.prices]
                    + [float(v) for v in rec.utilities])
    _write_summary(os.path.join(out, "ispa_summary"), header, rows,
                   args.format)
    if not args.quiet:
        final = ", ".join(f"{units.si_to_usd_per_gcycle(v):.4f}"
                          for v in result.prices.p)
        print(f"final prices ($/Gcycle): {final}")
    return 0


def _cmd_baseline(args, config):
    scenario, prices = _scenario_and_prices(args, config)
    kind = {"local": BaselineKind.LOCAL_ONLY,
            "cloud": BaselineKind.CLOUD_ONLY,
            "evenly": BaselineKind.EVENLY,
            "social": BaselineKind.SOCIALLY_OPTIMAL}[args.kind]
    so = SocialOptParams(restarts=args.restarts, seed=args.seed)
    value, feasible, _ = evaluate_baseline(scenario, kind, prices,
                                           so_params=so)
    out = _out_dir(args.out)
    _write_summary(os.path.join(out, f"baseline_{args.kind}"),
                   ["scheme", "mean_disutility", "feasible"],
                   [[args.kind, value, feasible]], args.format)
    if not args.quiet:
        print(f"{args.kind}: mean disutility {value:.6g} feasible={feasible}")
    return 0


def _cmd_poa(args, config):
    scenario, prices = _scenario_and_prices(args, config)
    report = poa(scenario, prices,
                 IpoaParams(max_outer_iters=args.max_rounds),
                 SocialOptParams(restarts=args.restarts, seed=args.seed))
    out = _out_dir(args.out)
    _write_summary(os.path.join(out, "poa"),
                   ["avg_ne_disutility", "avg_so_disutility", "poa"],
                   [[report.avg_ne, report.avg_so, report.poa]], args.format)
    if not args.quiet:
        print(f"poa={report.poa:.4f} (ne={report.avg_ne:.6g} "
              f"so={report.avg_so:.6g})")
    return 0


def _cmd_experiment(args, config):
    recipe_text = args.recipe or (config or {}).get("recipe")
    if recipe_text is None:
        raise UsageError("--recipe (or config 'recipe') is required")
    try:
        recipe = Recipe(recipe_text)
    except ValueError:
        raise UsageError(
            f"unknown recipe {recipe_text!r}; choose from "
            f"{[r.value for r in Recipe]}")
    cfg = config or {}
    sweep = cfg.get("sweep") or (
        [float(v) for v in args.sweep.split(",")] if args.sweep else None)
    spec = ExperimentSpec(
        recipe=recipe,
        scenario=_scenario_spec(args, config),
        ipoa=IpoaParams(max_outer_iters=args.max_rounds),
        ispa=IspaParams(max_iters=50 if args.full else args.iters),
        so=SocialOptParams(restarts=10 if args.full else args.restarts,
                           seed=args.seed),
        prices_usd_per_gcycle=(tuple(cfg["prices_usd_per_gcycle"])
                               if cfg.get("prices_usd_per_gcycle") else
                               (tuple(float(v) for v in
                                      args.prices.split(","))
                                if args.prices else None)),
        sweep=tuple(sweep) if sweep else None,
        save_profiles=args.save_profiles,
        full=args.full,
        out_format=args.format)
    outputs, failures = run_experiment(spec, args.out)
    if not args.quiet:
        for path in outputs:
            print(path)
        for failure in failures:
            print(f"FAILED: {failure}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_validate(args, config):
    scenario, prices = _scenario_and_prices(args, config)
    report = validate_scenario(scenario, prices, seed=args.seed,
                               points=args.points)
    if not args.quiet:
        print(f"gradient max rel err: {report['worst_grad_rel_err']:.3e}")
        print(f"hessian  max rel err: {report['worst_hess_rel_err']:.3e}")
        print(f"min hessian eigenvalue: "
              f"{report['min_hessian_eigenvalue']:.3e}")
        print("PASS" if report["passed"] else "FAIL")
    return 0 if report["passed"] else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mecgame",
        description="Stackelberg pricing and task-offloading simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a scenario JSON file")
    _add_common(p)

    p = sub.add_parser("ipoa", help="solve the follower game")
    _add_common(p)
    p.add_argument("--max-rounds", type=int, default=200)
    p.add_argument("--save-profiles", action="store_true")

    p = sub.add_parser("ispa", help="run the leader pricing iteration")
    _add_common(p)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--max-rounds", type=int, default=200)
    p.add_argument("--save-profiles", action="store_true")

    p = sub.add_parser("baseline", help="evaluate a comparison scheme")
    _add_common(p)
    p.add_argument("--kind", choices=("local", "cloud", "evenly", "social"),
                   required=True)
    p.add_argument("--restarts", type=int, default=4)

    p = sub.add_parser("poa", help="price of anarchy at fixed prices")
    _add_common(p)
    p.add_argument("--max-rounds", type=int, default=200)
    p.add_argument("--restarts", type=int, default=4)

    p = sub.add_parser("experiment", help="run a figure recipe")
    _add_common(p)
    p.add_argument("--recipe", help=f"one of {[r.value for r in Recipe]}")
    p.add_argument("--sweep", help="comma list of sweep values")
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--max-rounds", type=int, default=200)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--save-profiles", action="store_true")
    p.add_argument("--full", action="store_true",
                   help="paper-scale budgets (I_ISPA=50, 10 restarts)")

    p = sub.add_parser("validate", help="run derivative/curvature checks")
    _add_common(p)
    p.add_argument("--points", type=int, default=40)
    return parser


_COMMANDS = {
    "generate": _cmd_generate,
    "ipoa": _cmd_ipoa,
    "ispa": _cmd_ispa,
    "baseline": _cmd_baseline,
    "poa": _cmd_poa,
    "experiment": _cmd_experiment,
    "validate": _cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config) if args.config else None
        return _COMMANDS[args.command](args, config)
    except (UsageError, InvalidOverride, ScenarioFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MecGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
