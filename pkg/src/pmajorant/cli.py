"""Command line harness.

    pmajorant sweep --config configs/poisson_p2.json --out-dir out/
    pmajorant ineq --seed 42 --trials 100000
    pmajorant constants --p 3 --domain 0 1

Exit codes: 0 success, 1 configuration error, 2 a certified bound failed
(or the inequality suite found a violation).
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .constants import constants_table
from .errors import ConfigError, PMajorantError
from .harness import CSV_COLUMNS, problem_from_config, run_sweep
from .ineqlab import DEFAULT_PS, run_suite

log = logging.getLogger("pmajorant")

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


def load_schema():
    return json.loads(resources.files("pmajorant").joinpath("data/run_config.schema.json").read_text())


def validate_config(cfg):
    """Schema check plus the cross-field rules; errors carry a JSON pointer."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(x) for x in err.absolute_path)
        raise ConfigError(err.message, pointer)
    n_ref = cfg["reference"]["n_ref"]
    for k, cn in enumerate(cfg["approximations"]):
        if n_ref % cn:
            raise ConfigError(f"coarse level {cn} does not divide n_ref={n_ref}", f"/approximations/{k}")
    if n_ref < 4 * max(cfg["approximations"]):
        raise ConfigError("n_ref must be at least four times the largest coarse level", "/reference/n_ref")
    prob = cfg["problem"]
    if prob["kind"] == "fractional" and prob.get("s") is None:
        raise ConfigError("fractional problems need s", "/problem/s")
    if prob["kind"] == "obstacle" and prob.get("phi") is None:
        raise ConfigError("obstacle problems need phi", "/problem/phi")
    if prob["kind"] == "anisotropic1d" and prob.get("a") is None:
        raise ConfigError("anisotropic problems need a", "/problem/a")
    return cfg


def read_config(path):
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}", "") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "") from exc
    return validate_config(cfg)


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _timestamp():
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def _spec(cfg):
    return problem_from_config(cfg["problem"], cfg["reference"]["n_ref"], cfg.get("quadrature"))


def _reference_json(u_ref):
    return {"provenance": u_ref.provenance, "est_accuracy": u_ref.est_accuracy, "kind": u_ref.kind,
            "marks": [float(m) for m in u_ref.marks], "meta": _plain(u_ref.meta), "field": u_ref.field.to_json()}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if k != "history"}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def cmd_sweep(cfg, out_dir, quiet, write_tables=True):
    spec = _spec(cfg)
    variants = cfg.get("eta_star", ["ideal", "postprocessed"])
    mode = cfg.get("constants_mode", "rigorous")
    result = run_sweep(spec, cfg["approximations"], variants, mode)
    out = cfg.get("output", {})
    report = {
        "timestamp": _timestamp(),
        "version": __version__,
        "config": cfg,
        "reference": {k: v for k, v in _reference_json(result.reference).items() if k != "field"},
        "constants": {k: c.to_json() for k, c in result.constants.items()},
        "cases": [row.to_json() for row in result.rows],
        "extras": _plain(result.extras),
        "certified_violations": len(result.certified_violations),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / out.get("json", "report.json")
    json_path.write_text(_dump(report))
    if write_tables:
        with open(out_dir / out.get("csv", "sweep.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in result.rows:
                w.writerow(row.csv_values())
        if out.get("svg"):
            from .plotting import sweep_plot

            sweep_plot(result.rows, out_dir / out["svg"], f"{spec.kind}, p = {spec.p:g}")
    if not quiet:
        for row in result.rows:
            r = row.report
            print(f"{row.coarse_n:5d} {row.eta_star:14s} error={r.error_measure:.6g} majorant={r.majorant:.6g} "
                  f"eff={r.efficiency:.4g} certified={r.certified}")
        if "contact_region" in result.extras:
            print("contact region:", result.extras["contact_region"])
    if result.certified_violations:
        log.error("%d certified sandwich checks failed", len(result.certified_violations))
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_solve(cfg, out_dir, quiet):
    from .solvers import solve_reference

    u_ref = solve_reference(_spec(cfg))
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / cfg.get("output", {}).get("json", "solution.json")
    path.write_text(_dump({"timestamp": _timestamp(), "config": cfg, "reference": _reference_json(u_ref)}))
    if not quiet:
        print(f"{u_ref.provenance}: est_accuracy={u_ref.est_accuracy:.3e}, written to {path}")
    return EXIT_OK


def cmd_ineq(seed, trials, ps, out_dir, quiet):
    report = run_suite(seed, trials, ps)
    data = report.to_json()
    text = _dump(data)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "ineq_report.json").write_text(text)
    if not quiet:
        sys.stdout.write(text)
    if report.violations:
        log.error("violations in %s", report.failing())
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_constants(p, domain, quiet):
    table = {k: c.to_json() for k, c in constants_table(p, tuple(domain)).items()}
    if not quiet:
        sys.stdout.write(_dump({"p": p, "domain": domain, "constants": table}))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="pmajorant", description="A posteriori error bounds for p-Laplace problems")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path)
    common.add_argument("--out-dir", type=Path, default=Path("."))
    common.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="compute the reference solution")
    sub.add_parser("estimate", parents=[common], help="bounds for every approximation, JSON only")
    sub.add_parser("sweep", parents=[common], help="bounds plus CSV table and SVG plot")
    ineq = sub.add_parser("ineq", parents=[common], help="random tests of the pointwise inequalities")
    ineq.add_argument("--seed", type=int, default=42)
    ineq.add_argument("--trials", type=int, default=100_000)
    ineq.add_argument("--p", type=float, nargs="+", default=list(DEFAULT_PS))
    const = sub.add_parser("constants", parents=[common], help="embedding constants with provenance")
    const.add_argument("--p", type=float, required=True)
    const.add_argument("--domain", type=float, nargs=2, default=[0.0, 1.0])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "ineq":
            return cmd_ineq(args.seed, args.trials, args.p, args.out_dir, args.quiet)
        if args.command == "constants":
            return cmd_constants(args.p, args.domain, args.quiet)
        if args.config is None:
            raise ConfigError(f"{args.command} needs --config", "")
        cfg = read_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg, args.out_dir, args.quiet)
        return cmd_sweep(cfg, args.out_dir, args.quiet, write_tables=args.command == "sweep")
    except ConfigError as exc:
        log.error("configuration error %s", exc)
        return EXIT_CONFIG
    except PMajorantError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
