"""Command-line front end.

Subcommands: run, certify, shadow, sweep. Every command reads one JSON
config file; the few flags that exist override the matching config
entries, so sweep scripts can reuse a base file. Reports are written as
sorted-key JSON with no timestamps, which makes reruns byte-identical.

Exit codes: 0 success, 2 infeasible budget or constraint, 3 numerical
failure, 4 config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .driver import (
    config_from_dict,
    run_experiment,
    shadow_experiment,
    sweep_experiment,
    sweep_rows_to_csv,
)
from .errors import (
    BlowUp,
    CapTooSmall,
    ConfigError,
    ConstantsInfeasible,
    DomainMismatch,
    InfeasibleBudget,
    NumericalDomainError,
    OracleUnreliable,
    OrderError,
    StepCollapse,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

_INFEASIBLE = (InfeasibleBudget, ConstantsInfeasible, StepCollapse,
               CapTooSmall, OrderError)
_NUMERICAL = (NumericalDomainError, BlowUp, OracleUnreliable, DomainMismatch)


def _jsonable(value):
    """Mirror a report into plain JSON types; non-finite floats become
    the strings 'inf', '-inf', 'nan'."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def _write_json(path: str, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def _load_config(args) -> dict:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config!r} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    # flags win over the file
    if getattr(args, "ell", None) is not None:
        raw["ell"] = args.ell
    if getattr(args, "rho", None) is not None:
        raw["rho"] = args.rho
    if getattr(args, "h", None) is not None:
        raw["sampling"] = {"mode": "uniform", "h": args.h}
    if getattr(args, "seed", None) is not None:
        raw["rng_seed"] = args.seed
    return raw


def _out_dir(args) -> str:
    out = args.out
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_run(args) -> int:
    config = config_from_dict(_load_config(args))
    result = run_experiment(config)
    out = _out_dir(args)
    _write_json(os.path.join(out, "run_report.json"), result.report)
    result.plan.sampling.to_csv(os.path.join(out, "sampling.csv"))
    traj_dir = os.path.join(out, "trajectories")
    os.makedirs(traj_dir, exist_ok=True)
    result.truncated.to_csv(os.path.join(traj_dir, "truncated.csv"))
    result.reference.to_csv(os.path.join(traj_dir, "reference.csv"))
    result.error.to_csv(os.path.join(traj_dir, "error.csv"))
    stats = result.report["stats"]
    print(f"run: J={result.plan.sampling.count} "
          f"max_gap={result.plan.sampling.envelope!r} "
          f"max_abs_error={stats['max_abs_error']!r} "
          f"feasible={str(result.certificate.feasible).lower()}")
    return EXIT_OK


def _cmd_certify(args) -> int:
    config = config_from_dict(_load_config(args))
    result = run_experiment(config)
    out = _out_dir(args)
    payload = {
        "config": config.describe(),
        "certificate": result.report["certificate"],
    }
    _write_json(os.path.join(out, "certificate.json"), payload)
    cert = result.report["certificate"]
    verdict = "sound" if cert["sound"] else "unsound"
    print(f"certify: kind={cert['kind']} epsilon={cert['epsilon']!r} "
          f"measured={cert['measured_max_abs']!r} "
          f"feasible={str(cert['feasible']).lower()} verdict={verdict}")
    return EXIT_OK


def _cmd_shadow(args) -> int:
    config = config_from_dict(_load_config(args))
    outcome = shadow_experiment(config)
    out = _out_dir(args)
    _write_json(os.path.join(out, "shadow_report.json"), outcome.report)
    res = outcome.result
    print(f"shadow: found={str(res.found).lower()} y0_star={res.y0_star!r} "
          f"achieved={res.achieved_error!r} epsilon={res.epsilon!r} "
          f"evaluations={res.evaluations}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = config_from_dict(_load_config(args))
    rows = sweep_experiment(config, workers=args.workers)
    out = _out_dir(args)
    sweep_rows_to_csv(rows, os.path.join(out, "sweep_summary.csv"))
    ok = sum(1 for r in rows if r["status"] == "ok")
    sound = sum(1 for r in rows if r.get("sound"))
    print(f"sweep: points={len(rows)} ok={ok} sound={sound}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taylorcert",
        description=("Certified truncated-Taylor integration: admissible "
                     "sampling, a-priori error certificates, shadowing."))
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default="taylorcert_out",
                       help="output directory (created if missing)")
        p.add_argument("--ell", type=int, default=None,
                       help="override the truncation order")
        p.add_argument("--rho", type=float, default=None,
                       help="override the deviation budget")
        p.add_argument("--h", type=float, default=None,
                       help="override sampling with a uniform step")
        p.add_argument("--seed", type=int, default=None,
                       help="override the sweep seed echoed in reports")

    p_run = sub.add_parser("run", help="integrate and report measured errors")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cert = sub.add_parser("certify",
                            help="emit a certificate with a sound/unsound verdict")
    common(p_cert)
    p_cert.set_defaults(func=_cmd_certify)

    p_shadow = sub.add_parser("shadow",
                              help="search for a shadowing initial condition")
    common(p_shadow)
    p_shadow.set_defaults(func=_cmd_shadow)

    p_sweep = sub.add_parser("sweep", help="run a cartesian parameter sweep")
    common(p_sweep)
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="concurrent sweep workers")
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INFEASIBLE as exc:
        print(f"infeasible: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
