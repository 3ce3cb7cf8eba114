"""Command-line front end: ``distcurv {curvature,check,prescribe,validate,models}``.

Exit codes: 0 success, 1 property violation (failed check, residual or
validation), 2 usage or input validation, 3 numeric degeneracy, 4 not
contact, 5 no positive root, 6 schedule exhausted, 7 method not applicable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from ._parallel import ENV_THREADS, map_chunks
from .expr import DomainError, ExprError, evaluate_many, parse_expr, to_dag
from .fields import (
    DegenerateError,
    GridSpec,
    KernelOfForm,
    MetricError,
    check_contact,
    check_transverse_pair,
    gram_schmidt_adapted,
)
from .framecalc import stretch_metric
from .models import BUILTIN_NAMES, SchemaError, builtin, resolve_model
from .prescribe import (
    InvalidTarget,
    NoPositiveRoot,
    NonpositiveSolution,
    NotApplicable,
    NotContact,
    PrescriptionProblem,
    ScheduleExhausted,
    VerificationFailed,
    prescribe,
)
from .riemann import frame_curvatures
from .validation import SUITES, run_suite

SCHEMA_VERSION = 1
CSV_HEADER = ("u1", "u2", "u3", "K", "Ke", "KG", "c", "B_XX", "B_XY", "B_YY")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_NOT_CONTACT = 4
EXIT_NO_ROOT = 5
EXIT_SCHEDULE = 6
EXIT_NOT_APPLICABLE = 7

# most specific first
_ERROR_CODES = (
    (NotContact, EXIT_NOT_CONTACT),
    ((NoPositiveRoot, NonpositiveSolution), EXIT_NO_ROOT),
    (ScheduleExhausted, EXIT_SCHEDULE),
    (NotApplicable, EXIT_NOT_APPLICABLE),
    ((DegenerateError, MetricError, DomainError), EXIT_DEGENERATE),
    ((InvalidTarget, SchemaError, ExprError, KeyError, ValueError, FileNotFoundError), EXIT_USAGE),
)


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _fmt(x: float) -> str:
    # 17 significant digits round-trip exactly; -0 is written as 0
    return format(float(x) + 0.0, ".17g")


def _report(command: str, args, **body) -> dict:
    echo = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    return {"schema_version": SCHEMA_VERSION, "command": command, "args": echo, **body}


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(report: dict, out: str | None):
    _emit(json.dumps(report, indent=2, sort_keys=False) + "\n", out)


def _load(ref: str):
    try:
        return resolve_model(ref)
    except KeyError as exc:
        raise CliError(str(exc.args[0]) if exc.args else str(exc)) from None


def _chart_model(ref: str):
    model = _load(ref)
    if not model.has_chart:
        raise CliError(f"model {model.name!r} has no chart; it only provides frame data")
    return model


def _summary(values: np.ndarray) -> dict:
    return {"min": float(np.min(values)), "max": float(np.max(values)), "mean": float(np.mean(values))}


# -- curvature --------------------------------------------------------------

def cmd_curvature(args) -> int:
    model = _chart_model(args.model)
    d = model.distribution(args.dist)
    grid = GridSpec(args.grid)
    pts = grid.points(model.chart)
    g = model.metric
    if args.stretch is not None:
        n = gram_schmidt_adapted(g, d, chart=model.chart, grid=grid).n
        g = stretch_metric(g, n, parse_expr(args.stretch), points=pts)
    frame = gram_schmidt_adapted(g, d, chart=model.chart, grid=grid)
    rows = map_chunks(lambda b: frame_curvatures(g, frame, b).rows(), pts, args.threads)
    table = np.concatenate([pts, rows], axis=1)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in table:
            w.writerow([_fmt(x) for x in r])
        _emit(buf.getvalue(), args.out)
    else:
        report = _report(
            "curvature",
            args,
            model=model.name,
            grid=args.grid,
            columns=list(CSV_HEADER),
            rows=[[float(x) for x in r] for r in table],
            summary={name: _summary(table[:, i]) for i, name in enumerate(CSV_HEADER) if i >= 3},
            status="ok",
        )
        _emit_json(report, args.out)
    return EXIT_OK


# -- check ------------------------------------------------------------------

def _as_distribution(model, name: str):
    if name in model.distributions:
        return model.distributions[name]
    if name in model.one_forms:
        return KernelOfForm(model.one_forms[name], name)
    known = sorted(set(model.distributions) | set(model.one_forms))
    raise CliError(f"model {model.name!r} has no distribution or one-form {name!r} (known: {', '.join(known)})")


def _contact_json(name, r) -> dict:
    out = {"name": name, "is_contact": r.is_contact, "min_abs_invariant": r.min_abs, "sign": r.sign,
           "argmin": list(r.argmin)}
    if r.bracket_min_abs is not None:
        out["min_abs_bracket"] = r.bracket_min_abs
        out["bracket_sign"] = r.bracket_sign
    return out


def cmd_check(args) -> int:
    model = _chart_model(args.model)
    if not args.contact and not args.bicontact:
        raise CliError("nothing to check: give --contact NAME... and/or --bicontact A B")
    grid = GridSpec(args.grid)
    results, ok = [], True
    for name in args.contact or []:
        r = check_contact(_as_distribution(model, name), model.chart, grid)
        results.append({"check": "contact", **_contact_json(name, r)})
        ok &= r.is_contact
    if args.bicontact:
        a, b = args.bicontact
        r = check_transverse_pair(_as_distribution(model, a), _as_distribution(model, b), model.chart, grid)
        results.append({"check": "bicontact", "pair": [a, b], "is_bicontact": r.is_bicontact,
                        "min_transversality": r.min_transversality,
                        "first": _contact_json(a, r.first), "second": _contact_json(b, r.second)})
        ok &= r.is_bicontact
    _emit_json(_report("check", args, model=model.name, grid=args.grid, results=results,
                       status="ok" if ok else "violation"), args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


# -- prescribe --------------------------------------------------------------

def _result_json(result, problem, emit_fields: bool) -> dict:
    pts = problem.grid.points(problem.model.chart)
    a_vals = evaluate_many([result.a], pts)[0]
    r = result.residuals
    out = {
        "D0": result.D0,
        "lambda": result.lam,
        "lambda_direction": result.lambda_direction,
        "rho": result.rho,
        "a_on_grid": _summary(a_vals),
        "residuals": {"quantity": r.quantity, "max": r.max, "mean": r.mean, "argmax": list(r.argmax),
                      "n_points": r.n_points, "tol": result.tol},
    }
    if emit_fields:
        dag = to_dag([result.a, *result.g_final.entries])
        out["fields"] = {"format": "dag", "names": ["a", "g11", "g12", "g13", "g22", "g23", "g33"], **dag}
    return out


def cmd_prescribe(args) -> int:
    model = _chart_model(args.model)
    problem = PrescriptionProblem(
        model,
        args.dist,
        parse_expr(args.target),
        args.method,
        grid=GridSpec(args.grid),
        delta_disc=args.delta_disc,
        delta_neg=args.delta_neg,
        eta=args.eta,
        frame=args.frame,
        tol=args.tol,
    )
    model.distribution(args.dist)
    if args.eta is not None:
        model.distribution(args.eta)
    start = time.perf_counter()
    code, status = EXIT_OK, "ok"
    try:
        result = prescribe(problem)
    except VerificationFailed as exc:
        result, code, status = exc.result, EXIT_VIOLATION, "residual-exceeds-tolerance"
        print(f"error: {exc}", file=sys.stderr)
    body = _result_json(result, problem, args.emit_fields)
    body["seconds"] = round(time.perf_counter() - start, 3)
    _emit_json(_report("prescribe", args, model=model.name, method=problem.method, status=status, **body), args.out)
    return code


# -- validate ---------------------------------------------------------------

def cmd_validate(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    reports, ok = [], True
    for s in suites:
        res = run_suite(s, args.samples, args.seed, args.tol)
        ok &= res.passed
        reports.append({"suite": s, "tol": res.tol, "passed": res.passed, "max_deviation": res.max_deviation,
                        "rows": res.rows, "notes": res.notes})
        if not res.passed:
            worst = max(res.rows, key=lambda r: r["max_dev"] if r.get("passes", False) is False else -1)
            print(f"error: suite {s} failed; worst case {json.dumps(worst)}", file=sys.stderr)
    _emit_json(_report("validate", args, suites=reports, status="ok" if ok else "violation"), args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


# -- models -----------------------------------------------------------------

def cmd_models(args) -> int:
    rows = []
    for name in BUILTIN_NAMES:
        m = builtin(name)
        rows.append({
            "name": name,
            "chart": m.has_chart,
            "distributions": sorted(m.distributions),
            "one_forms": sorted(m.one_forms),
            "frames": sorted(m.frames),
            "description": m.description,
        })
    if args.format == "json":
        _emit_json(_report("models", args, models=rows, status="ok"), args.out)
    else:
        lines = []
        for r in rows:
            extra = f"  distributions: {', '.join(r['distributions'])}" if r["distributions"] else "  frame data only"
            lines.append(f"{r['name']:<22}{r['description']}\n{extra}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distcurv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=None):
        sp.add_argument("--out", help="write the report to a file instead of stdout")
        sp.add_argument("--threads", type=_positive_int, default=None,
                        help=f"worker threads for grid evaluation (default: ${ENV_THREADS} or all cores)")
        if fmt:
            sp.add_argument("--format", choices=fmt, default=fmt[0])

    sp = sub.add_parser("curvature", help="K, Ke, KG, c and B of a distribution at every grid point")
    sp.add_argument("--model", required=True, help="builtin name or model JSON file")
    sp.add_argument("--dist", required=True)
    sp.add_argument("--grid", type=_positive_int, default=16)
    sp.add_argument("--stretch", "--a", dest="stretch", help="stretch the metric along the normal by this expression first")
    common(sp, ("csv", "json"))
    sp.set_defaults(func=cmd_curvature)

    sp = sub.add_parser("check", help="contact and bi-contact checks")
    sp.add_argument("--model", required=True)
    sp.add_argument("--contact", nargs="+", metavar="NAME", help="distributions or one-forms that must be contact")
    sp.add_argument("--bicontact", nargs=2, metavar=("A", "B"), help="pair that must form a bi-contact structure")
    sp.add_argument("--grid", type=_positive_int, default=16)
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("prescribe", help="build a metric with prescribed curvature and verify it")
    sp.add_argument("--model", required=True)
    sp.add_argument("--dist", required=True)
    sp.add_argument("--method", required=True, choices=("sectional", "sectional-bicontact", "gaussian"))
    sp.add_argument("--target", required=True, help="target curvature expression in u1, u2, u3")
    sp.add_argument("--eta", help="transverse distribution for the bi-contact method")
    sp.add_argument("--frame", help="named model frame for the bi-contact method")
    sp.add_argument("--grid", type=_positive_int, default=16)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--delta-disc", type=float, default=0.1)
    sp.add_argument("--delta-neg", type=float, default=1e-3)
    sp.add_argument("--emit-fields", action="store_true", help="include a and g_final as a shared-node expression graph")
    common(sp)
    sp.set_defaults(func=cmd_prescribe)

    sp = sub.add_parser("validate", help="closed-form curvature formulas against the coordinate oracle")
    sp.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    sp.add_argument("--samples", type=_positive_int, default=None)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--tol", type=float, default=None)
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("models", help="list builtin models")
    common(sp, ("text", "json"))
    sp.set_defaults(func=cmd_models)
    return p


_EXPR_OPTIONS = ("--target", "--stretch", "--a")


def _join_expr_options(argv):
    """Attach expression values to their option so ``--target -2+sin(u3)`` parses."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _EXPR_OPTIONS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_expr_options(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", None) is not None:
        os.environ[ENV_THREADS] = str(args.threads)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:
        for types, code in _ERROR_CODES:
            if isinstance(exc, types):
                msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
                print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
