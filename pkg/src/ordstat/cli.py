"""Command-line front end: ``ordstat <command> [flags]``.

Exit codes: 0 ok, 2 usage or malformed input, 3 domain error, 4 inconclusive
numerical classification (partial output is still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, rng
from ._backend import NAME as BACKEND
from .alpha_analysis import admissible_interval, alpha_curve, lambda_floor
from .assumptions import boundary_sign_check, classify_lemma_case
from .errors import (HypothesisNotVerified, InapplicableTag, Inconclusive, ModelFileError,
                     NonPositiveEstimate, OrdstatError, UnknownPanel)
from .estimators import EstimatorSpec, blee, estimate, isotonic_pair, named_estimator
from .models import Kind, Target, blee_bsee_constants, load_model, model_from_mapping
from .risk_engine import (FIG1_PANELS, FIG2_PANELS, dominance_report, figure_id, reproduce_figure,
                          simulate_risks)
from .svg import line_chart

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_INCONCLUSIVE = 0, 2, 3, 4
CSV_HEADER = ("lambda", "estimator_id", "risk", "std_err", "n", "seed")


class UsageError(Exception):
    pass


def _g(v) -> str:
    """Round-trippable float text; identical bytes for identical doubles."""
    return format(float(v), ".17g")


def _floats(text: str, what: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{what}: expected {n} numbers, got {len(vals)}")
    return vals


def _seed(text) -> int:
    try:
        return int(str(text), 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from None


def default_seed() -> int:
    env = os.environ.get("ORDSTAT_SEED")
    if env:
        return _seed(env)
    return rng.DEFAULT_SEED


# ---------------------------------------------------------------------------
# shared pieces

def _model(args):
    if args.model and args.family:
        raise UsageError("give either --model or --family, not both")
    if args.model:
        try:
            return load_model(args.model)
        except FileNotFoundError:
            raise ModelFileError(f"model file not found: {args.model}") from None
    if not args.family:
        raise UsageError("a model is required (--model FILE or --family NAME --params ...)")
    from .models import _FAMILIES, family_name
    fam = family_name(args.family)
    d = {"kind": _FAMILIES[fam][2].value, "family": fam,
         "params": _floats(args.params or "", "--params")}
    if args.theta:
        d["theta"] = _floats(args.theta, "--theta", 2)
    return model_from_mapping(d)


def default_companion(model, target: Target) -> float:
    """Companion constant used when none is given: the family's designated dominator."""
    name, p = model.family.name, model.family.params
    t1 = target is Target.THETA1
    if name == "bivariate_normal":
        return 0.0
    if name == "exponential":
        return p[0] * p[1] / (p[0] + p[1]) if t1 else p[0]
    if name == "gamma":
        return 1.0 / p[1] if t1 else 1.0 / (p[0] + 1.0)
    if name == "power":
        if t1:
            return (p[1] + 2.0) / (p[1] + 1.0)
        a = p[0] + p[1]
        return (a + 2.0) / (a + 1.0)
    c1, c2 = blee_bsee_constants(model)
    return c2 if t1 else c1


def _lambda_grid(args, kind: Kind):
    if getattr(args, "lambdas", None):
        return np.array(_floats(args.lambdas, "--lambdas"))
    lo = args.lambda_min if args.lambda_min is not None else lambda_floor(kind)
    hi = args.lambda_max if args.lambda_max is not None else (10.0 if kind is Kind.LOCATION else 20.0)
    n = args.points
    if n < 1 or not hi > lo:
        raise UsageError("need --points >= 1 and --lambda-max > --lambda-min")
    if kind is Kind.LOCATION:
        if lo < 0:
            raise UsageError("location lambda values must be >= 0")
        return np.geomspace(1.0 + lo, 1.0 + hi, n) - 1.0
    if lo < 1:
        raise UsageError("scale lambda values must be >= 1")
    return np.geomspace(lo, hi, n)


def _estimator(args, model, target: Target) -> EstimatorSpec:
    if args.tag and args.alpha is not None:
        raise UsageError("give either --tag or --alpha, not both")
    if args.tag:
        return named_estimator(model, args.tag, target)
    c1, c2 = blee_bsee_constants(model)
    own, other = (c1, c2) if target is Target.THETA1 else (c2, c1)
    c0 = own if args.c0 is None else args.c0
    comp = other if args.companion is None else args.companion
    if args.alpha is None:
        base = blee(model, target)
        if args.c0 is None and args.companion is None:
            return base
        return EstimatorSpec(target, model.kind, c0, comp, base.alpha)
    return EstimatorSpec(target, model.kind, c0, comp, args.alpha)


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def _enc(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _enc(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_enc(x) for x in v]
    return v


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_enc(obj), indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")


def _write_manifest(args, outputs, status: int):
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {"command": args.command, "flags": flags, "seed": args.seed, "version": __version__,
                "backend": BACKEND, "outputs": sorted(str(o) for o in outputs), "exit_code": status}
    _write_json(_out(args) / f"{args.command}.manifest.json", manifest)


def _write_risk_csv(path: Path, curves):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in curves:
            for lam, eid, r, se, n, seed in c.rows():
                w.writerow((_g(lam), eid, _g(r), _g(se), n, seed))


# ---------------------------------------------------------------------------
# commands; each returns (exit code, list of files written)

def cmd_estimate(args):
    model = _model(args)
    target = Target(args.target)
    spec = _estimator(args, model, target)
    x = _floats(args.x, "--x", 2)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonPositiveEstimate)
        value = estimate(spec, x)
    d1, d2 = spec.pair(x)
    lower, upper = isotonic_pair(d1, d2, (spec.alpha, 1.0 - spec.alpha)) if 0 <= spec.alpha <= 1 \
        else (None, None)
    record = {"x": x, "target": target.value, "estimator": spec.to_dict(), "d": [float(d1), float(d2)],
              "pooled_pair": None if lower is None else [lower, upper],
              "ordered": bool(d1 <= d2), "estimate": value,
              "warnings": [str(w.message) for w in caught]}
    print(_g(value))
    print(json.dumps(_enc(record), sort_keys=True))
    path = _out(args) / "estimate.json"
    _write_json(path, record)
    return EXIT_OK, [path]


def _companion(args, model, target):
    return default_companion(model, target) if args.companion is None else args.companion


def cmd_interval(args):
    model = _model(args)
    target = Target(args.target)
    comp = _companion(args, model, target)
    report = classify_lemma_case(model, target, comp)
    path = _out(args) / "interval.json"
    record = {"model": model.to_mapping(), "target": target.value, "companion": comp,
              "assumptions": report.to_dict(with_grids=False)}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HypothesisNotVerified)
            iv = admissible_interval(model, target, comp, report)
    except Inconclusive as exc:
        record["inconclusive"] = {"reason": str(exc), "lambdas": exc.lambdas, "values": exc.values}
        _write_json(path, record)
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE, [path]
    record["interval"] = iv.to_dict()
    record["interval"].update({"text": str(iv), "boundary_value": iv.boundary_value,
                               "limit": str(iv.limit), "dominance_rule": iv.dominance_rule})
    _write_json(path, record)
    print(str(iv) + ("" if iv.trusted else "  (untrusted: lemma hypotheses not certified)"))
    return EXIT_OK, [path]


def cmd_check(args):
    model = _model(args)
    target = Target(args.target)
    comp = _companion(args, model, target)
    report = classify_lemma_case(model, target, comp, n=args.grid_size)
    record = {"model": model.to_mapping(), "target": target.value, "companion": comp,
              "assumptions": report.to_dict(with_grids=args.with_grids)}
    if model.kind is Kind.LOCATION:
        record["boundary_sign"] = boundary_sign_check(model, target, comp)
    path = _out(args) / "check.json"
    _write_json(path, record)
    print(f"{report.lemma_case}: shape={report.fz_shape} psi={report.psi_direction} "
          f"k={report.k_direction}")
    return EXIT_OK, [path]


def cmd_alpha_curve(args):
    model = _model(args)
    target = Target(args.target)
    comp = _companion(args, model, target)
    grid = _lambda_grid(args, model.kind)
    path = _out(args) / "alpha_curve.csv"
    status = EXIT_OK
    try:
        curve = alpha_curve(model, target, comp, grid, method=args.method, n=args.n, seed=args.seed)
        limit = str(curve.limit)
    except Inconclusive as exc:
        curve = alpha_curve(model, target, comp, grid, with_limit=False, method=args.method,
                            n=args.n, seed=args.seed)
        limit = f"Inconclusive({exc})"
        status = EXIT_INCONCLUSIVE
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("lambda", "alpha", "method"))
        for lam, a, m in curve.rows():
            w.writerow((_g(lam), _g(a), m))
    print(f"limit as lambda -> inf: {limit}", file=sys.stderr)
    return status, [path]


def cmd_risk(args):
    model = _model(args)
    target = Target(args.target)
    grid = _lambda_grid(args, model.kind)
    if args.tag:
        specs = [named_estimator(model, t, target) for t in args.tag]
    else:
        specs = [_estimator(argparse.Namespace(tag=None, alpha=args.alpha, c0=args.c0,
                                               companion=args.companion), model, target)]
    curves = simulate_risks(model, specs, grid, args.n, args.seed, workers=args.workers)
    path = _out(args) / "risk.csv"
    _write_risk_csv(path, curves)
    written = [path]
    if args.against:
        inc = named_estimator(model, args.against, target)
        reports = [dominance_report(model, s, inc, grid, args.n, args.seed, workers=args.workers)
                   for s in specs]
        dpath = _out(args) / "dominance.json"
        _write_json(dpath, [{"challenger": r.challenger, "incumbent": r.incumbent, "verdict": r.verdict,
                             "cells": r.cells} for r in reports])
        written.append(dpath)
        for r in reports:
            print(f"{r.challenger} vs {r.incumbent}: {r.verdict} (max z {np.max(r.z):.2f})",
                  file=sys.stderr)
    return EXIT_OK, written


def cmd_figure(args):
    fid = figure_id(args.id)
    panel = _floats(args.panel, "--panel")
    if len(panel) != 2:
        raise UnknownPanel(f"panel {args.panel!r} must be two numbers")
    kind = Kind.LOCATION if fid == 1 else Kind.SCALE
    grid = _lambda_grid(args, kind)
    res = reproduce_figure(fid, panel, args.n, args.seed, grid, workers=args.workers)
    out = _out(args)
    csv_path, svg_path = out / f"{res.name}.csv", out / f"{res.name}.svg"
    _write_risk_csv(csv_path, res.curves)
    a, b = res.panel
    names = ("sigma1", "sigma2") if fid == 1 else ("a1", "a2")
    title = f"Figure {fid}: {names[0]}={a:g}, {names[1]}={b:g}"
    series = [(c.estimator_id, c.lambda_grid, c.risk) for c in res.curves]
    svg_path.write_text(line_chart(series, title=title, xlabel="lambda",
                                   ylabel="risk"), encoding="utf-8")
    inc = res.curves[0].estimator_id
    for cid, r in res.reports.items():
        print(f"{res.name}: {cid} vs {inc}: {r.verdict} (max z {np.max(r.z):.2f})", file=sys.stderr)
    return EXIT_OK, [csv_path, svg_path]


# ---------------------------------------------------------------------------
# parser

def _add_model(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", help="TOML model file (keys: kind, family, params, theta)")
    g.add_argument("--family", help="built-in family: bivariate_normal, exponential, gamma, power")
    g.add_argument("--params", help="comma-separated family parameters")
    g.add_argument("--theta", help="theta1,theta2 (only used where the model needs it)")


def _add_target(p):
    p.add_argument("--target", choices=[t.value for t in Target], default="theta1")


def _add_grid(p):
    p.add_argument("--lambdas", help="explicit comma-separated lambda values")
    p.add_argument("--lambda-min", type=float)
    p.add_argument("--lambda-max", type=float)
    p.add_argument("--points", type=int, default=30)


def _add_estimator(p, multi_tag=False):
    if multi_tag:
        p.add_argument("--tag", action="append", help="named estimator (repeatable)")
    else:
        p.add_argument("--tag", help="named estimator, e.g. blee, exp-dominator, rmle")
    p.add_argument("--alpha", type=float, help="pooling weight")
    p.add_argument("--c0", type=float, help="constant on the target's own coordinate")
    p.add_argument("--companion", type=float, help="nu (theta1) or beta (theta2)")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ordstat", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=_seed, default=None,
                       help="64-bit seed; defaults to $ORDSTAT_SEED or 0xC0FFEE")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("estimate", help="evaluate a mixed estimator at one observation")
    _add_model(p), _add_target(p), _add_estimator(p), common(p)
    p.add_argument("--x", required=True, help="observation x1,x2")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("interval", help="admissible weight interval")
    _add_model(p), _add_target(p), common(p)
    p.add_argument("--companion", type=float)
    p.set_defaults(func=cmd_interval)

    p = sub.add_parser("check", help="lemma hypothesis checks")
    _add_model(p), _add_target(p), common(p)
    p.add_argument("--companion", type=float)
    p.add_argument("--grid-size", type=int, default=512)
    p.add_argument("--with-grids", action="store_true", help="include evaluated grids in the JSON")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("alpha-curve", help="optimal weight as a function of lambda")
    _add_model(p), _add_target(p), _add_grid(p), common(p)
    p.add_argument("--companion", type=float)
    p.add_argument("--method", choices=("quadrature", "oracle"), default="quadrature")
    p.add_argument("--n", type=int, default=200_000, help="replications for the oracle method")
    p.set_defaults(func=cmd_alpha_curve)

    p = sub.add_parser("risk", help="Monte Carlo risk curves")
    _add_model(p), _add_target(p), _add_estimator(p, multi_tag=True), _add_grid(p), common(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--against", help="named incumbent for a dominance report")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("figure", help="reproduce one simulation panel (CSV + SVG)")
    p.add_argument("--id", required=True, help="1 or 2")
    p.add_argument("--panel", required=True, help="two parameters, e.g. 1,0.5")
    _add_grid(p), common(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_figure)
    return top


_USAGE_ERRORS = (UsageError, ModelFileError, UnknownPanel, InapplicableTag)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        try:
            args.seed = default_seed()
        except argparse.ArgumentTypeError as exc:
            parser.error(f"ORDSTAT_SEED: {exc}")
    outputs = []
    try:
        status, outputs = args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"ordstat {args.command}: error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except Inconclusive as exc:
        print(f"ordstat {args.command}: inconclusive: {exc}", file=sys.stderr)
        status = EXIT_INCONCLUSIVE
    except (OrdstatError, ValueError) as exc:
        print(f"ordstat {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = EXIT_DOMAIN
    try:
        _write_manifest(args, outputs, status)
    except OSError as exc:
        print(f"ordstat: could not write manifest: {exc}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
