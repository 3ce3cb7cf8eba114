"""Formula-versus-oracle comparison suites.

Each suite returns a :class:`SuiteResult` with one row per (model, case) and
an overall pass flag.  The stretched-metric suites compare the closed-form
curvatures of :mod:`distcurv.framecalc` with the coordinate oracle of
:mod:`distcurv.riemann` at random chart points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import DomainError, ScalarExpr, as_expr, coord, derive, evaluate_many, func, FUNCTIONS
from .fields import Frame, frame_metric, gram_schmidt_adapted
from .framecalc import (
    SIGNS,
    calibrate_signs,
    frame_data_fields,
    frame_rotation_check,
    k_extrinsic_formula,
    k_gaussian_formula,
    k_sectional_formula,
    stretch_coefficients,
    stretch_metric,
)
from .models import CHART_BUILTINS, Model, builtin
from .riemann import frame_curvatures

__all__ = [
    "SUITES",
    "STRETCH_FACTORS",
    "SuiteResult",
    "sample_points",
    "model_cases",
    "run_suite",
    "stretch_suite",
    "frame_invariance_suite",
    "fd_suite",
    "signs_suite",
    "random_expr",
]

SUITES = ("lemma31", "lemma32", "lemma33", "frame-invariance", "fd", "signs")
STRETCH_FACTORS = ("0.3", "1", "2.7", "2 + sin(u3)")
S3_RADIUS = 1.5
DEFAULT_TOL = {"lemma31": 1e-6, "lemma32": 1e-6, "lemma33": 1e-6, "frame-invariance": 1e-8, "fd": 1e-4, "signs": 1e-6}


@dataclass
class SuiteResult:
    suite: str
    tol: float
    rows: list[dict] = field(default_factory=list)
    passed: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max((r["max_dev"] for r in self.rows), default=0.0)


def sample_points(model: Model, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random interior points; the stereographic sphere chart is sampled in ``|u| <= 1.5``."""
    if model.name == "s3-round":
        out = np.empty((0, 3))
        while len(out) < n:
            p = rng.uniform(-S3_RADIUS, S3_RADIUS, size=(2 * n, 3))
            out = np.concatenate([out, p[np.linalg.norm(p, axis=1) <= S3_RADIUS]])
        return out[:n]
    return model.chart.sample(n, rng, margin=0.02)


def model_cases(model: Model):
    """``(label, g, frame)`` for every distribution (Gram-Schmidt frame) and
    every named frame (in the model metric if orthonormal there, else in its
    own frame metric)."""
    pts = model.grid_points()
    for name, d in model.distributions.items():
        yield f"{name}", model.metric, gram_schmidt_adapted(model.metric, d, chart=model.chart)
    for name, fr in model.frames.items():
        if fr.gram_deviation(model.metric, pts) <= 1e-10:
            yield f"frame:{name}", model.metric, Frame(fr.X, fr.Y, fr.n, model.metric)
        else:
            g = frame_metric(fr)
            yield f"frame:{name}/own-metric", g, Frame(fr.X, fr.Y, fr.n, g)


def _point(p) -> list[float]:
    return [float(x) for x in p]


def stretch_suite(suite: str, samples: int = 200, seed: int = 7, tol: float | None = None,
                  models=CHART_BUILTINS, factors=STRETCH_FACTORS) -> SuiteResult:
    """``lemma31`` (K), ``lemma32`` (K_e) or ``lemma33`` (K_G) in stretched metrics."""
    tol = DEFAULT_TOL[suite] if tol is None else tol
    pick = {"lemma31": ("K", k_sectional_formula), "lemma32": ("Ke", k_extrinsic_formula),
            "lemma33": ("KG", k_gaussian_formula)}[suite]
    attr, formula = pick
    out = SuiteResult(suite, tol)
    rng = np.random.default_rng(seed)
    for mname in models:
        model = builtin(mname) if isinstance(mname, str) else mname
        pts = sample_points(model, samples, rng)
        for label, g, frame in model_cases(model):
            sc = stretch_coefficients(frame_data_fields(g, frame)).evaluate(pts)
            for a_text in factors:
                a = as_expr(a_text)
                a_vals = evaluate_many([a], pts)[0]
                ga = stretch_metric(g, frame.n, a)
                unit = Frame(frame.X, frame.Y, frame.n / func("sqrt", a), ga)
                oracle = getattr(frame_curvatures(ga, unit, pts), attr)
                pred = formula(sc, a_vals)
                dev = np.abs(pred - oracle) / (1.0 + np.abs(oracle))
                k = int(np.argmax(dev))
                row = {"model": model.name, "case": label, "a": a_text, "max_dev": float(dev[k]),
                       "point": _point(pts[k]), "formula": float(pred[k]), "oracle": float(oracle[k]),
                       "n_points": len(pts)}
                out.rows.append(row)
                out.passed &= bool(row["max_dev"] <= tol)
    return out


def frame_invariance_suite(samples: int = 200, seed: int = 7, tol: float | None = None,
                           models=CHART_BUILTINS) -> SuiteResult:
    """Largest change of ``(c2, P, E)`` under in-plane rotations and the swap reflection."""
    tol = DEFAULT_TOL["frame-invariance"] if tol is None else tol
    out = SuiteResult("frame-invariance", tol)
    rng = np.random.default_rng(seed)
    for mname in models:
        model = builtin(mname) if isinstance(mname, str) else mname
        pts = sample_points(model, samples, rng)
        for label, g, frame in model_cases(model):
            worst, where = 0.0, None
            for theta, reflect in [(t, r) for t in (0.0, math.pi / 3, *rng.uniform(0, 2 * math.pi, 2)) for r in (False, True)]:
                dev = frame_rotation_check(g, frame, pts, float(theta), reflect)
                if dev >= worst:
                    worst, where = dev, (float(theta), reflect)
            out.rows.append({"model": model.name, "case": label, "max_dev": worst,
                             "theta": where[0], "reflect": where[1], "n_points": len(pts)})
            out.passed &= bool(worst <= tol)
    return out


_LEAVES = ("u1", "u2", "u3", "pi", "num")
_BINARY = ("+", "-", "*", "/", "^")


def random_expr(rng: np.random.Generator, depth: int = 3) -> ScalarExpr:
    """Random expression over the full grammar.

    ``log`` and ``sqrt`` get arguments of the form ``1 + x^2``, divisors are
    shifted away from zero and ``exp``, ``sinh``, ``cosh``, ``tan`` see a
    bounded ``sin`` argument, so samples stay inside the evaluation domain
    and away from overflow.
    """
    if depth <= 0 or rng.random() < 0.2:
        leaf = _LEAVES[rng.integers(len(_LEAVES))]
        if leaf == "num":
            return as_expr(round(float(rng.uniform(-3, 3)), 3))
        if leaf == "pi":
            return as_expr("pi")
        return coord(int(leaf[1]))
    if rng.random() < 0.4:
        name = FUNCTIONS[rng.integers(len(FUNCTIONS))]
        arg = random_expr(rng, depth - 1)
        if name in ("log", "sqrt"):
            arg = 1 + arg * arg
        elif name in ("exp", "sinh", "cosh", "tan"):
            arg = func("sin", arg)
        return func(name, arg)
    op = _BINARY[rng.integers(len(_BINARY))]
    left = random_expr(rng, depth - 1)
    if op == "^":
        return left ** int(rng.integers(0, 4))
    right = random_expr(rng, depth - 1)
    if op == "/":
        return left / (2 + func("sin", right))
    return {"+": left + right, "-": left - right, "*": left * right}[op]


def fd_suite(samples: int = 1000, seed: int = 7, tol: float | None = None, h: float = 1e-4) -> SuiteResult:
    """Symbolic derivative against a central difference: ``|d - fd| <= tol (1 + |value|)``."""
    tol = DEFAULT_TOL["fd"] if tol is None else tol
    out = SuiteResult("fd", tol)
    rng = np.random.default_rng(seed)
    worst = {"max_dev": 0.0}
    skipped = 0
    for i in range(samples):
        e = random_expr(rng, int(rng.integers(1, 5)))
        p = rng.uniform(-1, 1, size=3)
        axis = int(rng.integers(1, 4))
        try:
            offsets = np.zeros((2, 3))
            offsets[0, axis - 1], offsets[1, axis - 1] = h, -h
            value, sym = evaluate_many([e, derive(e, axis)], p[None, :])
            fp, fm = evaluate_many([e], p + offsets)[0]
        except DomainError:
            skipped += 1
            continue
        fd = (fp - fm) / (2 * h)
        dev = abs(float(sym[0]) - float(fd)) / (1.0 + abs(float(value[0])))
        if dev > worst["max_dev"]:
            worst = {"max_dev": dev, "expr": str(e), "point": _point(p), "axis": axis,
                     "symbolic": float(sym[0]), "fd": float(fd)}
    worst["samples"] = samples - skipped
    out.rows.append(worst)
    out.passed = bool(worst["max_dev"] <= tol)
    if skipped:
        out.notes.append(f"{skipped} samples hit a domain error and were skipped")
    return out


def signs_suite(samples: int = 200, seed: int = 7, tol: float | None = None,
                a_values=(0.3, 1.0, 2.7), models=CHART_BUILTINS) -> SuiteResult:
    """Score all four sign conventions of the derivative terms of ``P``.

    Passes when, on every model whose cases make the choices distinguishable,
    exactly one convention matches the oracle, and that convention is the
    hard-coded one.
    """
    tol = DEFAULT_TOL["signs"] if tol is None else tol
    out = SuiteResult("signs", tol)
    rng = np.random.default_rng(seed)
    for mname in models:
        model = builtin(mname) if isinstance(mname, str) else mname
        pts = sample_points(model, samples, rng)
        cases = [(label, g, fr, pts) for label, g, fr in model_cases(model)]
        records = calibrate_signs(cases, a_values, tol)
        per_sign = {}
        for r in records:
            s = per_sign.setdefault(r["signs"], {"max_rel_dev": 0.0, "passes": True})
            s["max_rel_dev"] = max(s["max_rel_dev"], r["max_rel_dev"])
            s["passes"] &= bool(r["passes"])
        winners = [s for s, v in per_sign.items() if v["passes"]]
        for signs, v in sorted(per_sign.items(), reverse=True):
            out.rows.append({"model": model.name, "signs": list(signs), "max_dev": v["max_rel_dev"],
                             "passes": v["passes"]})
        if len(winners) == 1:
            out.passed &= winners[0] == SIGNS
        elif SIGNS not in winners:
            out.passed = False
        else:
            out.notes.append(f"{model.name}: {len(winners)} conventions tie (derivative terms vanish)")
    # at least one model must separate the conventions
    distinct = [m for m in {r["model"] for r in out.rows}
                if sum(r["passes"] for r in out.rows if r["model"] == m) == 1]
    out.passed &= bool(distinct)
    return out


def run_suite(suite: str, samples: int | None = None, seed: int = 7, tol: float | None = None) -> SuiteResult:
    if suite in ("lemma31", "lemma32", "lemma33"):
        return stretch_suite(suite, samples or 200, seed, tol)
    if suite == "frame-invariance":
        return frame_invariance_suite(samples or 200, seed, tol)
    if suite == "fd":
        return fd_suite(samples or 1000, seed, tol)
    if suite == "signs":
        return signs_suite(samples or 200, seed, tol)
    raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
