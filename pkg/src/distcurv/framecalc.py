"""Bracket scalars of an adapted frame and the stretched-metric curvature formulas.

For an orthonormal frame ``(X, Y, n)`` of a metric ``g`` and the metric
``g_a`` stretched along ``n`` by ``a > 0`` (so ``<n, n>_a = a``, unchanged on
the plane), the curvatures of ``span(X, Y)`` are

    K(a)   = -3/4 c^2 a + P - E / a
    K_e(a) = E / a
    K_G(a) = -3/4 c^2 a + P

with ``c = <[X,Y], n>``, ``E = <[X,n],X><[Y,n],Y> - 1/4 (<[X,n],Y> + <[Y,n],X>)^2``
and ``P = X<[X,Y],Y> - Y<[X,Y],X> - <[X,Y],X>^2 - <[X,Y],Y>^2
+ 1/2 c (<[Y,n],X> - <[X,n],Y>)``, all brackets paired in ``g``.

The signs of the two derivative terms in ``P`` were fixed against the
coordinate curvature oracle; :func:`calibrate_signs` reruns that comparison.
``a`` may be a non-constant function: no derivative of ``a`` enters ``K``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from .expr import as_expr, evaluate_many
from .fields import Frame, MetricField, VectorField, lie_bracket

__all__ = [
    "FrameData",
    "StretchCoefficients",
    "SIGNS",
    "frame_data_fields",
    "extract_frame_data",
    "stretch_coefficients",
    "k_sectional_formula",
    "k_extrinsic_formula",
    "k_gaussian_formula",
    "stretch_metric",
    "anisotropic_stretch",
    "rotate_frame",
    "frame_rotation_check",
    "calibrate_signs",
]

# (sign of X<[X,Y],Y>, sign of Y<[X,Y],X>) in P
SIGNS = (1, -1)


@dataclass(frozen=True)
class FrameData:
    """Bracket scalars of an orthonormal frame.

    Entries are floats, numpy arrays (one value per point) or, from
    :func:`frame_data_fields`, closed-form expressions.
    """

    c: object = 0.0
    bXY_X: object = 0.0
    bXY_Y: object = 0.0
    bXn_X: object = 0.0
    bXn_Y: object = 0.0
    bYn_X: object = 0.0
    bYn_Y: object = 0.0
    dX: object = 0.0
    dY: object = 0.0

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f.name) for f in dc_fields(self))

    def evaluate(self, points) -> "FrameData":
        vals = evaluate_many([as_expr(v) for v in self.as_tuple()], points)
        return FrameData(*vals)


@dataclass(frozen=True)
class StretchCoefficients:
    """``K(a) = -3/4 c2 a + P - E/a`` and ``K_e(a) = E/a``."""

    c2: object
    P: object
    E: object

    def evaluate(self, points) -> "StretchCoefficients":
        return StretchCoefficients(*evaluate_many([as_expr(self.c2), as_expr(self.P), as_expr(self.E)], points))


def frame_data_fields(g: MetricField, frame: Frame) -> FrameData:
    """Closed-form bracket scalars of ``frame`` paired in ``g``."""
    X, Y, n = frame
    XY = lie_bracket(X, Y)
    Xn = lie_bracket(X, n)
    Yn = lie_bracket(Y, n)
    bXY_X = g.pair(XY, X)
    bXY_Y = g.pair(XY, Y)
    return FrameData(
        c=g.pair(XY, n),
        bXY_X=bXY_X,
        bXY_Y=bXY_Y,
        bXn_X=g.pair(Xn, X),
        bXn_Y=g.pair(Xn, Y),
        bYn_X=g.pair(Yn, X),
        bYn_Y=g.pair(Yn, Y),
        dX=X.apply(bXY_Y),
        dY=Y.apply(bXY_X),
    )


def extract_frame_data(g: MetricField, frame: Frame, points, tol: float = 1e-8) -> FrameData:
    """Numeric bracket scalars at ``points``; the frame must be orthonormal for ``g``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dev = frame.gram_deviation(g, pts)
    if dev > tol:
        raise ValueError(f"frame is not orthonormal for the metric (Gram deviation {dev:.3g})")
    return frame_data_fields(g, frame).evaluate(points)


def stretch_coefficients(fd: FrameData, signs: tuple[int, int] = SIGNS) -> StretchCoefficients:
    s1, s2 = signs
    c2 = fd.c * fd.c
    E = fd.bXn_X * fd.bYn_Y - 0.25 * (fd.bXn_Y + fd.bYn_X) * (fd.bXn_Y + fd.bYn_X)
    P = (
        s1 * fd.dX
        + s2 * fd.dY
        - fd.bXY_X * fd.bXY_X
        - fd.bXY_Y * fd.bXY_Y
        + 0.5 * fd.c * (fd.bYn_X - fd.bXn_Y)
    )
    return StretchCoefficients(c2, P, E)


def _check_a(a):
    if np.any(np.asarray(a) <= 0):
        raise ValueError("stretch factor a must be positive")


def k_sectional_formula(sc: StretchCoefficients, a):
    _check_a(a)
    return -0.75 * sc.c2 * a + sc.P - sc.E / a


def k_extrinsic_formula(sc: StretchCoefficients, a):
    _check_a(a)
    return sc.E / a


def k_gaussian_formula(sc: StretchCoefficients, a):
    _check_a(a)
    return -0.75 * sc.c2 * a + sc.P


def stretch_metric(g: MetricField, n: VectorField, a, points=None) -> MetricField:
    """``g + (a - 1) nu_flat (x) nu_flat`` with ``nu = n / |n|_g``.

    Lengths along ``n`` scale by ``sqrt(a)``; the ``g``-orthogonal complement of
    ``n`` is untouched.  If ``points`` are given, ``a > 0`` is checked there.
    """
    a = as_expr(a)
    if points is not None:
        vals = evaluate_many([a], np.atleast_2d(points))[0]
        if np.any(vals <= 0):
            raise ValueError("stretch factor a must be positive on the grid")
    nu_flat = g.lower(n).components
    nn = g.pair(n, n)
    w = (a - 1) / nn
    entries = [g.entries[s] + w * nu_flat[i] * nu_flat[j] for s, (i, j) in enumerate(_IDX)]
    return MetricField(entries)


_IDX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def anisotropic_stretch(g: MetricField, frame: Frame, lam: float) -> MetricField:
    """Metric with ``|X| = lam``, ``|Y| = 1/lam``, ``|n| = 1`` and the frame still orthogonal."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    Xf = g.lower(frame.X).components
    Yf = g.lower(frame.Y).components
    kx = lam**2 - 1.0
    ky = lam**-2 - 1.0
    entries = [
        g.entries[s] + kx * Xf[i] * Xf[j] + ky * Yf[i] * Yf[j] for s, (i, j) in enumerate(_IDX)
    ]
    return MetricField(entries)


def rotate_frame(frame: Frame, theta: float, reflect: bool = False) -> Frame:
    """Rotate ``(X, Y)`` by ``theta`` inside the plane; ``reflect`` swaps them first."""
    X, Y = (frame.Y, frame.X) if reflect else (frame.X, frame.Y)
    c, s = math.cos(theta), math.sin(theta)
    return Frame(X * c + Y * s, X * (-s) + Y * c, frame.n, frame.metric)


def frame_rotation_check(g: MetricField, frame: Frame, points, theta: float, reflect: bool = False) -> float:
    """Largest change of ``(c2, P, E)`` when the frame is rotated (or reflected) in the plane."""
    base = stretch_coefficients(extract_frame_data(g, frame, points))
    turned = stretch_coefficients(extract_frame_data(g, rotate_frame(frame, theta, reflect), points))
    dev = 0.0
    for u, v in ((base.c2, turned.c2), (base.P, turned.P), (base.E, turned.E)):
        dev = max(dev, float(np.max(np.abs(np.asarray(u) - np.asarray(v)))))
    return dev


def calibrate_signs(cases, a_values=(1.0,), tol: float = 1e-6) -> list[dict]:
    """Score the four sign choices of the derivative terms against the oracle.

    ``cases`` is an iterable of ``(label, g, frame, points)``.  Returns one
    record per ``(case, signs)`` with the worst relative deviation of the
    formula sectional curvature from the oracle, and whether it is within ``tol``.
    """
    from .riemann import sectional_oracle

    records = []
    for label, g, frame, points in cases:
        fd = extract_frame_data(g, frame, points)
        oracle = {}
        for a in a_values:
            ga = stretch_metric(g, frame.n, a)
            oracle[a] = sectional_oracle(ga, frame.X, frame.Y, points)
        for signs in itertools.product((1, -1), repeat=2):
            sc = stretch_coefficients(fd, signs)
            worst = 0.0
            for a, k in oracle.items():
                dev = np.abs(k_sectional_formula(sc, a) - k) / (1.0 + np.abs(k))
                worst = max(worst, float(np.max(dev)))
            records.append({"case": label, "signs": signs, "max_rel_dev": worst, "passes": worst <= tol})
    return records
