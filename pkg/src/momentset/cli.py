"""Command-line front end.

Subcommands: simulate, estimate, mc, rates, diagnose, oracle.  Every
subcommand reads a JSON config (``--config``; ``mc``/``rates`` also accept
``--design``) and writes its outputs atomically.  Exit codes: 0 success,
2 configuration problem (message names the offending key), 1 runtime
failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .alt import BoundedWeightPolicy, KernelSpec, bounded_region, kernel_region
from .core import (ConfigError, InstrumentFamily, MomentSetError, SFunction,
                   _atomic_write_text, load_sample_csv, save_sample_csv)
from .ksstat import TuningPolicy, critical_value
from .mc import (McDesign, design_from_json, dgp_from_json, divergence_diagnostic,
                 oracle_set, rate_experiment, run_mc, simulate, model_for,
                 tuning_from_json, write_axis_table, write_distance_table,
                 write_hull_table, write_manifest, write_per_rep)
from .models import (build_model, model_spec_from_json, apply_boundary_transform,
                     transform_from_json)
from .regions import ThetaGrid, confidence_region, region_to_csv, region_to_json

_SCHEMA = 1


def _load_config(path: str) -> dict:
    if not path:
        raise ConfigError("config", "a --config file is required")
    try:
        with open(path) as handle:
            obj = json.load(handle)
    except FileNotFoundError:
        raise ConfigError("config", f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}")
    if not isinstance(obj, dict):
        raise ConfigError("config", "top level must be a JSON object")
    version = obj.get("schema_version", _SCHEMA)
    if version != _SCHEMA:
        raise ConfigError("schema_version", f"unsupported version {version}")
    return obj


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(key, "missing required config field")
    return cfg[key]


def _check_keys(cfg: dict, allowed) -> None:
    for key in cfg:
        if key not in allowed and key != "schema_version":
            raise ConfigError(key, "unknown config field")


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MOMENTSET_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("MOMENTSET_THREADS", f"not an integer: {env!r}")
    return 1


def _out_stem(path: str) -> str:
    return path[:-4] if path.endswith(".csv") or path.endswith(".json") else path


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, ("dgp", "n", "seed", "rep"))
    dgp = dgp_from_json(_require(cfg, "dgp"))
    n = int(_require(cfg, "n"))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    sample = simulate(dgp, n, seed, rep=int(cfg.get("rep", 0)))
    if not args.out:
        raise ConfigError("out", "simulate requires --out")
    save_sample_csv(args.out, sample)
    print(f"simulate: dgp={dgp.kind} n={n} seed={seed} -> {args.out}")
    return 0


def _build_grid(cfg: dict) -> ThetaGrid:
    return ThetaGrid.from_json(_require(cfg, "grid"))


def _cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, ("data", "model", "transform", "estimator", "family", "s",
                      "tuning", "grid", "kernel", "bounded"))
    sample = load_sample_csv(_require(cfg, "data"))
    model = build_model(model_spec_from_json(_require(cfg, "model")))
    if "transform" in cfg:
        sample = apply_boundary_transform(sample,
                                          transform_from_json(cfg["transform"]))
    grid = _build_grid(cfg)
    estimator = cfg.get("estimator", "weighted_ks")
    s = SFunction(**cfg.get("s", {"kind": "neg_part_sup_norm"}))
    family = InstrumentFamily(**cfg.get("family", {"kind": "all_data_intervals"}))
    threads = _resolve_threads(args)
    if estimator == "weighted_ks":
        tuning = tuning_from_json(cfg.get("tuning", {}))
        region = confidence_region(sample, model, grid, family, s, tuning,
                                   threads=threads)
    elif estimator == "bounded_ks":
        clean = {k: v for k, v in cfg.get("bounded", {}).items() if v is not None}
        region = bounded_region(sample, model, grid, family, s,
                                BoundedWeightPolicy(**clean), threads=threads)
    elif estimator == "kernel":
        clean = {k: v for k, v in cfg.get("kernel", {}).items() if v is not None}
        region = kernel_region(sample, model, grid, KernelSpec(**clean), s,
                               threads=threads)
    else:
        raise ConfigError("estimator", f"unknown estimator '{estimator}'")
    if not args.out:
        raise ConfigError("out", "estimate requires --out")
    if args.format == "json":
        region_to_json(args.out, region)
    else:
        region_to_csv(args.out, region)
    print(f"estimate: {estimator} n={sample.n} members={region.n_members}/"
          f"{grid.n_points} c={region.c_used:.4f} -> {args.out}")
    return 0


def _cmd_mc(args) -> int:
    cfg = _load_config(args.design or args.config)
    design = design_from_json(cfg)
    if not args.out:
        raise ConfigError("out", "mc requires --out (used as an output stem)")
    threads = _resolve_threads(args)
    report = run_mc(design, threads=threads, progress=args.verbose)
    stem = _out_stem(args.out)
    write_distance_table(stem + "_distances.csv", report)
    write_axis_table(stem + "_axis.csv", report)
    write_hull_table(stem + "_hulls.csv", report)
    write_manifest(stem + "_manifest.json", report)
    write_per_rep(stem + "_reps.csv", report)
    for cell in report.cells:
        print(f"mc: {cell.estimator} n={cell.n} coverage={cell.coverage:.3f} "
              f"median_dH={cell.dh_q[0.5]:.4f} reps_ok={cell.n_ok}")
    print(f"mc: wrote {stem}_{{distances,axis,hulls}}.csv, "
          f"{stem}_manifest.json, {stem}_reps.csv")
    return 0


def _cmd_rates(args) -> int:
    cfg = _load_config(args.design or args.config)
    design = design_from_json(cfg)
    rep = rate_experiment(design)
    if not args.out:
        raise ConfigError("out", "rates requires --out")
    body = {"sizes": list(rep.sizes), "medians": list(rep.medians),
            "exponent": rep.exponent, "exponent_plain": rep.exponent_plain,
            "predicted_exponent": rep.predicted_exponent,
            "factors_observed": list(rep.factors_observed),
            "factors_predicted": list(rep.factors_predicted),
            "excluded_sizes": list(rep.excluded_sizes)}
    if args.format == "json":
        _atomic_write_text(args.out, json.dumps(body, indent=2) + "\n")
    else:
        lines = ["n,median_dh,regressor,factor_observed,factor_predicted"]
        for i, n in enumerate(rep.sizes):
            reg = critical_value(design.tuning, n) ** 2 * np.log(n) / n
            fo = f"{rep.factors_observed[i-1]:.6g}" if i else ""
            fp = f"{rep.factors_predicted[i-1]:.6g}" if i else ""
            lines.append(f"{n},{rep.medians[i]:.6g},{reg:.6g},{fo},{fp}")
        _atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"rates: exponent={rep.exponent:.3f} "
          f"observed_factors={['%.3f' % f for f in rep.factors_observed]} "
          f"-> {args.out}")
    return 0


def _cmd_diagnose(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, ("dgp", "sizes", "reps", "base_seed", "tuning", "theta"))
    dgp = dgp_from_json(cfg.get("dgp", {"kind": "contact_set"}))
    tuning = tuning_from_json(cfg.get("tuning", {}))
    seed = args.seed if args.seed is not None else int(cfg.get("base_seed", 0))
    rep = divergence_diagnostic(dgp, _require(cfg, "sizes"),
                                int(_require(cfg, "reps")), tuning=tuning,
                                base_seed=seed, theta=cfg.get("theta"))
    if not args.out:
        raise ConfigError("out", "diagnose requires --out")
    if args.format == "json":
        body = {"sizes": list(rep.sizes), "medians": list(rep.medians),
                "trend": rep.trend, "sigma_rule": rep.sigma_rule}
        _atomic_write_text(args.out, json.dumps(body, indent=2) + "\n")
    else:
        lines = ["n,median_sqrt_n_T"]
        lines += [f"{n},{m:.6g}" for n, m in zip(rep.sizes, rep.medians)]
        _atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"diagnose: sigma={rep.sigma_rule} medians="
          f"{['%.3f' % m for m in rep.medians]} trend={rep.trend:.2f} "
          f"-> {args.out}")
    return 0


def _cmd_oracle(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, ("dgp", "grid", "x_check_count"))
    dgp = dgp_from_json(_require(cfg, "dgp"))
    grid = _build_grid(cfg)
    oracle = oracle_set(dgp, grid, int(cfg.get("x_check_count", 1201)))
    if not args.out:
        raise ConfigError("out", "oracle requires --out")
    if args.format == "json":
        body = {"n_members": oracle.n_members,
                "hulls": [list(h) if h else None for h in oracle.hulls],
                "x_check_count": oracle.x_check_count}
        _atomic_write_text(args.out, json.dumps(body, indent=2) + "\n")
    else:
        pts = oracle.points()
        header = ",".join(f"theta{i+1}" for i in range(grid.dim))
        lines = [header] + [",".join(repr(float(v)) for v in row) for row in pts]
        _atomic_write_text(args.out, "\n".join(lines) + "\n")
    hulls = ["[%g, %g]" % tuple(h) if h else "empty" for h in oracle.hulls]
    print(f"oracle: dgp={dgp.kind} members={oracle.n_members} hulls={hulls} "
          f"-> {args.out}")
    return 0


_COMMANDS = {"simulate": _cmd_simulate, "estimate": _cmd_estimate,
             "mc": _cmd_mc, "rates": _cmd_rates, "diagnose": _cmd_diagnose,
             "oracle": _cmd_oracle}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momentset",
        description="Confidence regions for conditional moment inequality models.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config path")
        if name in ("mc", "rates"):
            p.add_argument("--design", help="alias for --config")
        else:
            p.set_defaults(design=None)
        p.add_argument("--out", help="output path (mc: stem for several files)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--verbose", action="store_true")
    return parser


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except MomentSetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
