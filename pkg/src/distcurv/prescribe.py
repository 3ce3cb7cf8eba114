"""Prescribing the curvature of a contact plane field by stretching the metric.

Three pipelines share one pattern: build the closed-form stretch coefficients
``(c2, P, E)`` of an adapted frame, solve pointwise for the stretch field
``a`` (in closed form, so the result is an explicit metric), then check the
curvature of the final metric with the coordinate oracle.

* ``sectional``: ``K = f < 0``.  Solve ``K(a) = f*D0`` for a doubling-schedule
  constant ``D0`` that keeps every point solvable, then scale the metric by
  ``D0`` (curvature scales by ``1/D0``).
* ``sectional_bicontact``: ``K = f`` for any sign, given a transverse contact
  structure.  An anisotropic stretch first makes ``E < 0`` everywhere, which
  guarantees a positive root.
* ``gaussian``: ``K_G = f < 0``; the equation is linear in ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_chunks
from .expr import ScalarExpr, as_expr, evaluate_many, func
from .fields import (
    DegenerateError,
    Frame,
    GridSpec,
    MetricField,
    Span,
    VectorField,
    cross,
    defining_form,
    frame_metric,
    gram_schmidt_adapted,
)
from .framecalc import (
    StretchCoefficients,
    anisotropic_stretch,
    frame_data_fields,
    stretch_coefficients,
    stretch_metric,
)
from .models import Model
from .riemann import frame_curvatures, sectional_oracle

__all__ = [
    "PrescriptionError",
    "NotContact",
    "NoPositiveRoot",
    "NonpositiveSolution",
    "ScheduleExhausted",
    "NotApplicable",
    "InvalidTarget",
    "VerificationFailed",
    "METHODS",
    "PrescriptionProblem",
    "PrescriptionResult",
    "ResidualReport",
    "solve_pointwise_quadratic",
    "solve_pointwise_linear",
    "quadratic_margin",
    "linear_margin",
    "search_D",
    "find_D",
    "find_lambda",
    "rescale_metric",
    "bicontact_frame",
    "prescribe",
    "prescribe_sectional",
    "prescribe_sectional_bicontact",
    "prescribe_gaussian",
    "verify_prescription",
]

METHODS = ("sectional", "sectional_bicontact", "gaussian")
C2_MIN = 1e-9
D_MAX = 2.0**60
LAMBDA_STEPS = 60


class PrescriptionError(Exception):
    """Base class for pipeline failures."""


class NotContact(PrescriptionError):
    """``<[X,Y],n>^2`` is not bounded away from zero on the grid."""


class NoPositiveRoot(PrescriptionError):
    """The pointwise quadratic has no positive solution somewhere."""


class NonpositiveSolution(PrescriptionError):
    """The pointwise linear equation gives ``a <= 0`` somewhere."""


class ScheduleExhausted(PrescriptionError):
    """No constant in the doubling schedule satisfied the margin."""


class NotApplicable(PrescriptionError):
    """No anisotropic stretch makes the extrinsic coefficient negative."""


class InvalidTarget(PrescriptionError, ValueError):
    """The target function violates the method's hypotheses."""


class VerificationFailed(PrescriptionError):
    """The oracle-measured curvature misses the target by more than the tolerance."""

    def __init__(self, result: "PrescriptionResult"):
        self.result = result
        r = result.residuals
        super().__init__(f"residual {r.max:.3g} exceeds tolerance {result.tol:.3g} at u = {r.argmax}")


def _where(points, mask):
    if points is None or not np.any(mask):
        return ""
    p = np.atleast_2d(points)[int(np.argmax(mask))]
    return " at u = (" + ", ".join(f"{x:.6g}" for x in p) + ")"


# -- pointwise solves -------------------------------------------------------

def solve_pointwise_quadratic(c2, P, E, t, points=None):
    """Largest positive root of ``-3/4 c2 a^2 + (P - t) a - E = 0``.

    Works on scalars or arrays.  Uses the cancellation-free form of the ``+``
    branch: ``(b + sqrt(D)) / (3/2 c2)`` for ``b >= 0`` and
    ``-2E / (sqrt(D) - b)`` otherwise, with ``b = P - t``, ``D = b^2 - 3 c2 E``.
    """
    c2, P, E, t = (np.asarray(x, dtype=float) for x in (c2, P, E, t))
    if np.any(c2 <= 0):
        raise ValueError("c2 must be positive")
    b = P - t
    disc = b * b - 3.0 * c2 * E
    if np.any(disc < 0):
        raise NoPositiveRoot("negative discriminant" + _where(points, disc < 0))
    root = np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(b >= 0, (b + root) / (1.5 * c2), -2.0 * E / (root - b))
    bad = ~(a > 0) | ~np.isfinite(a)
    if np.any(bad):
        raise NoPositiveRoot("no positive root" + _where(points, bad))
    return float(a) if a.ndim == 0 else a


def solve_pointwise_linear(c2, P, t, points=None):
    """``a = (P - t) / (3/4 c2)``; must be positive."""
    c2, P, t = (np.asarray(x, dtype=float) for x in (c2, P, t))
    if np.any(c2 <= 0):
        raise ValueError("c2 must be positive")
    a = (P - t) / (0.75 * c2)
    if np.any(a <= 0):
        raise NonpositiveSolution("P <= target" + _where(points, a <= 0))
    return float(a) if a.ndim == 0 else a


def quadratic_margin(c2, P, E, t):
    """Relative discriminant margin ``D / (b^2 + 3 c2 |E|)``; ``-inf`` where the
    larger root is not positive."""
    c2, P, E, t = (np.asarray(x, dtype=float) for x in (c2, P, E, t))
    b = P - t
    disc = b * b - 3.0 * c2 * E
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = disc / (b * b + 3.0 * c2 * np.abs(E))
    rel = np.where(np.isfinite(rel), rel, 0.0)
    positive = (E < 0) | ((b > 0) & (disc >= 0))
    return np.where(positive, rel, -np.inf)


def linear_margin(P, t):
    """``(P - t) / (|P| + |t|)``, the relative lead of ``P`` over the target."""
    P, t = np.asarray(P, dtype=float), np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = (P - t) / (np.abs(P) + np.abs(t))
    return np.where(np.isfinite(m), m, -np.inf)


def search_D(c2, P, E, f, delta: float = 0.1, kind: str = "quadratic") -> float:
    """Smallest ``D`` in ``1, 2, 4, ...`` with margin ``>= delta`` at every sample for ``t = f*D``."""
    c2 = np.asarray(c2, dtype=float)
    if np.any(c2 < C2_MIN):
        raise NotContact(f"min <[X,Y],n>^2 = {float(np.min(c2)):.3g} below {C2_MIN:g}")
    D = 1.0
    while D <= D_MAX:
        t = np.asarray(f) * D
        m = quadratic_margin(c2, P, E, t) if kind == "quadratic" else linear_margin(P, t)
        if np.all(m >= delta):
            return D
        D *= 2.0
    raise ScheduleExhausted(f"no D <= 2^60 reached margin {delta}")


def rescale_metric(g: MetricField, rho: float) -> MetricField:
    """``rho * g``; every curvature of the plane field scales by ``1/rho``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return g if rho == 1.0 else g.scaled(rho)


# -- problem / result -------------------------------------------------------

@dataclass
class PrescriptionProblem:
    model: Model
    distribution: str
    target: ScalarExpr
    method: str = "sectional"
    grid: GridSpec = field(default_factory=GridSpec)
    delta_disc: float = 0.1
    delta_neg: float = 1e-3
    eta: str | None = None
    frame: str | None = None
    tol: float = 1e-4

    def __post_init__(self):
        self.target = as_expr(self.target)
        self.method = self.method.replace("-", "_")
        if self.method not in METHODS:
            raise InvalidTarget(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not self.model.has_chart:
            raise InvalidTarget(f"model {self.model.name!r} has no chart")
        if self.method == "sectional_bicontact" and self.eta is None and self.frame is None:
            raise InvalidTarget("the bicontact method needs a transverse distribution (eta) or a frame")

    def sample_points(self) -> np.ndarray:
        """Grid nodes plus the 2x refined spot-check grid."""
        chart = self.model.chart
        return np.concatenate([self.grid.points(chart), self.grid.refined().points(chart)])


@dataclass
class ResidualReport:
    max: float
    mean: float
    argmax: tuple[float, float, float]
    n_points: int
    quantity: str


@dataclass
class PrescriptionResult:
    method: str
    a: ScalarExpr
    D0: float
    lam: float
    rho: float
    g_final: MetricField
    frame: Frame
    residuals: ResidualReport | None = None
    tol: float = 1e-4
    lambda_direction: str | None = None

    @property
    def ok(self) -> bool:
        return self.residuals is not None and self.residuals.max <= self.tol


# -- searches ---------------------------------------------------------------

def _target_values(problem: PrescriptionProblem, points):
    return evaluate_many([problem.target], points)[0]


def _coefficients(g: MetricField, frame: Frame) -> StretchCoefficients:
    return stretch_coefficients(frame_data_fields(g, frame))


def find_D(problem: PrescriptionProblem, coeffs: StretchCoefficients | None = None, frame: Frame | None = None) -> float:
    """Doubling search for the constant ``D0`` of the sectional/gaussian pipelines."""
    model = problem.model
    if frame is None:
        frame = gram_schmidt_adapted(model.metric, model.distribution(problem.distribution), chart=model.chart)
    if coeffs is None:
        coeffs = _coefficients(model.metric, frame)
    pts = problem.sample_points()
    c2, P, E = evaluate_many([as_expr(coeffs.c2), as_expr(coeffs.P), as_expr(coeffs.E)], pts)
    f = _target_values(problem, pts)
    kind = "linear" if problem.method == "gaussian" else "quadratic"
    D0 = search_D(c2, P, E, f, problem.delta_disc, kind)
    # runtime property: the chosen D leaves margin everywhere
    m = quadratic_margin(c2, P, E, f * D0) if kind == "quadratic" else linear_margin(P, f * D0)
    assert np.all(m >= problem.delta_disc)
    return D0


def _lambda_schedule():
    for k in range(1, LAMBDA_STEPS + 1):
        yield 2.0 ** (k / 2), "X"
        yield 2.0 ** (-k / 2), "Y"


def lambda_frame(frame: Frame, lam: float, g_lam: MetricField | None = None) -> Frame:
    return Frame(frame.X / lam, frame.Y * lam, frame.n, g_lam)


def find_lambda(g: MetricField, frame: Frame, points, delta_neg: float = 1e-3) -> tuple[float, str]:
    """Smallest anisotropic stretch making the extrinsic coefficient ``E <= -delta_neg``.

    Tries ``2^(k/2)`` then ``2^(-k/2)`` for ``k = 1, 2, ...``; ``E`` is recomputed
    in each stretched metric with the re-normalized frame ``(X/lam, lam*Y, n)``.
    Returns ``(lam, direction)`` where direction ``"X"`` means ``lam > 1``.
    """
    pts = np.atleast_2d(points)
    fd = frame_data_fields(g, frame)
    s1, r2 = evaluate_many([fd.bYn_X, fd.bXn_Y], pts)
    # E(lam) is dominated by <[Y,n],X> lam^2 for large lam and <[X,n],Y>/lam^2 for small lam
    if np.min(np.abs(s1)) <= C2_MIN and np.min(np.abs(r2)) <= C2_MIN:
        raise NotApplicable("neither span(Y, n) nor span(X, n) is a contact structure on the grid")
    for lam, direction in _lambda_schedule():
        g_lam = anisotropic_stretch(g, frame, lam)
        E = evaluate_many([_coefficients(g_lam, lambda_frame(frame, lam)).E], pts)[0]
        if np.max(E) <= -delta_neg:
            return lam, direction
    raise NotApplicable(f"no lambda in 2^(+-k/2), k <= {LAMBDA_STEPS}, made E <= -{delta_neg}")


def bicontact_frame(alpha, beta) -> Frame:
    """``X`` spanning ``ker alpha & ker beta``, ``Y in ker alpha`` with ``beta(Y) = 1``,
    ``n in ker beta`` with ``alpha(n) = 1`` (coefficient cross products)."""
    a, b = alpha.components, beta.components
    X = cross(a, b)
    xx = sum((x * x for x in X), as_expr(0))
    Y = VectorField(cross(X, a)) / xx
    n = VectorField(cross(b, X)) / xx
    return Frame(VectorField(X), Y, n)


def _adapted_to_pair(frame: Frame, xi_form, eta_form, points, tol=1e-9) -> bool:
    checks = [xi_form(frame.X), xi_form(frame.Y), eta_form(frame.X), eta_form(frame.n)]
    vals = evaluate_many(checks, points)
    return all(np.max(np.abs(v)) <= tol for v in vals)


def _bicontact_setup(problem: PrescriptionProblem) -> Frame:
    model = problem.model
    if problem.frame is not None:
        if problem.frame not in model.frames:
            raise InvalidTarget(f"model {model.name!r} has no frame {problem.frame!r}")
        return model.frames[problem.frame]
    xi = defining_form(model.distribution(problem.distribution))
    eta = defining_form(model.distribution(problem.eta))
    pts = problem.grid.points(model.chart)
    for fr in model.frames.values():
        if _adapted_to_pair(fr, xi, eta, pts):
            return fr
    a, b = xi.evaluate(pts), eta.evaluate(pts)
    sine = np.linalg.norm(np.cross(a, b), axis=-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
    if np.min(sine) < 1e-9:
        k = int(np.argmin(sine))
        raise DegenerateError(f"{problem.distribution!r} and {problem.eta!r} are not transverse", pts[k])
    return bicontact_frame(xi, eta)


# -- pipelines --------------------------------------------------------------

def _require_negative(problem: PrescriptionProblem, f_vals, points):
    bad = ~(f_vals < 0)
    if np.any(bad):
        raise InvalidTarget("target must be strictly negative on the grid" + _where(points, bad))


def _quadratic_root_expr(c2, P, E, t, b_nonnegative: bool) -> ScalarExpr:
    b = P - t
    root = func("sqrt", b * b - 3.0 * c2 * E)
    if b_nonnegative:
        return (b + root) / (1.5 * c2)
    return -2.0 * E / (root - b)


def _finish(problem, method, a, D0, lam, rho, g_base, frame, direction=None) -> PrescriptionResult:
    pts = problem.grid.points(problem.model.chart)
    g_a = stretch_metric(g_base, frame.n, a, points=pts)
    g_final = rescale_metric(g_a, rho)
    s = 1.0 / math.sqrt(rho)
    final_frame = Frame(frame.X * s, frame.Y * s, frame.n * (s / func("sqrt", a)), g_final)
    result = PrescriptionResult(method, a, D0, lam, rho, g_final, final_frame, tol=problem.tol,
                                lambda_direction=direction)
    result.residuals = verify_prescription(result, problem)
    if not result.ok:
        raise VerificationFailed(result)
    return result


def prescribe_sectional(problem: PrescriptionProblem) -> PrescriptionResult:
    """Metric whose sectional curvature on the plane field equals a negative target."""
    model = problem.model
    g = model.metric
    pts = problem.sample_points()
    f_vals = _target_values(problem, pts)
    _require_negative(problem, f_vals, pts)
    frame = gram_schmidt_adapted(g, model.distribution(problem.distribution), chart=model.chart)
    sc = _coefficients(g, frame)
    D0 = find_D(problem, sc, frame)
    t = problem.target * D0
    c2, P, E = evaluate_many([as_expr(sc.c2), as_expr(sc.P), as_expr(sc.E)], pts)
    solve_pointwise_quadratic(c2, P, E, f_vals * D0, pts)
    a = _quadratic_root_expr(sc.c2, sc.P, sc.E, t, b_nonnegative=bool(np.all(P - f_vals * D0 >= 0)))
    return _finish(problem, "sectional", a, D0, 1.0, D0, g, frame)


def prescribe_gaussian(problem: PrescriptionProblem) -> PrescriptionResult:
    """Metric whose Gaussian curvature ``K + K_e`` on the plane field equals a negative target."""
    model = problem.model
    g = model.metric
    pts = problem.sample_points()
    f_vals = _target_values(problem, pts)
    _require_negative(problem, f_vals, pts)
    frame = gram_schmidt_adapted(g, model.distribution(problem.distribution), chart=model.chart)
    sc = _coefficients(g, frame)
    D0 = find_D(problem, sc, frame)
    c2, P = evaluate_many([as_expr(sc.c2), as_expr(sc.P)], pts)
    solve_pointwise_linear(c2, P, f_vals * D0, pts)
    a = (sc.P - problem.target * D0) / (0.75 * sc.c2)
    return _finish(problem, "gaussian", a, D0, 1.0, D0, g, frame)


def prescribe_sectional_bicontact(problem: PrescriptionProblem) -> PrescriptionResult:
    """Metric with sectional curvature equal to an arbitrary target, using a
    transverse contact structure to force a negative extrinsic coefficient."""
    pts = problem.sample_points()
    frame = _bicontact_setup(problem)
    g0 = frame_metric(frame)
    lam, direction = find_lambda(g0, frame, pts, problem.delta_neg)
    g_lam = anisotropic_stretch(g0, frame, lam)
    frame_lam = lambda_frame(frame, lam, g_lam)
    sc = _coefficients(g_lam, frame_lam)
    c2, P, E = evaluate_many([as_expr(sc.c2), as_expr(sc.P), as_expr(sc.E)], pts)
    if np.any(c2 < C2_MIN):
        raise NotContact("<[X,Y],n> vanishes on the grid; the plane field is not contact")
    if np.any(E > -problem.delta_neg):
        raise NoPositiveRoot("extrinsic coefficient lost its negative margin" + _where(pts, E > -problem.delta_neg))
    f_vals = _target_values(problem, pts)
    solve_pointwise_quadratic(c2, P, E, f_vals, pts)
    a = _quadratic_root_expr(sc.c2, sc.P, sc.E, problem.target, b_nonnegative=bool(np.all(P - f_vals >= 0)))
    return _finish(problem, "sectional_bicontact", a, 1.0, lam, 1.0, g_lam, frame_lam, direction)


_PIPELINES = {
    "sectional": prescribe_sectional,
    "sectional_bicontact": prescribe_sectional_bicontact,
    "gaussian": prescribe_gaussian,
}


def prescribe(problem: PrescriptionProblem) -> PrescriptionResult:
    return _PIPELINES[problem.method](problem)


def verify_prescription(result, problem: PrescriptionProblem, threads: int | None = None) -> ResidualReport:
    """Oracle-measured ``|curvature - target|`` over the problem grid.

    Sectional methods compare ``K`` of ``span(X, Y)``; the gaussian method
    compares ``K + K_e`` (using ``result.frame`` when it is orthonormal for
    ``result.g_final``, else a fresh Gram-Schmidt frame of the same plane).
    """
    pts = problem.grid.points(problem.model.chart)
    g = result.g_final
    frame = result.frame
    if problem.method == "gaussian":
        if frame.gram_deviation(g, pts[:64]) > 1e-8:
            frame = gram_schmidt_adapted(g, Span(frame.X, frame.Y), chart=problem.model.chart)

        def measure(block):
            return frame_curvatures(g, frame, block).KG

        quantity = "KG"
    else:

        def measure(block):
            return sectional_oracle(g, frame.X, frame.Y, block)

        quantity = "K"
    measured = map_chunks(measure, pts, threads)
    err = np.abs(measured - _target_values(problem, pts))
    k = int(np.argmax(err))
    return ResidualReport(float(err[k]), float(np.mean(err)), tuple(float(x) for x in pts[k]), len(pts), quantity)
