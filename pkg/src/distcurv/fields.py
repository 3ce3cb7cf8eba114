"""Charts, vector fields, 1-forms and metrics built from closed-form expressions.

Everything here is symbolic until evaluated: a :class:`VectorField` holds three
:class:`~distcurv.expr.ScalarExpr` components, so brackets, pairings and frames
stay exactly differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .expr import ONE, ZERO, ScalarExpr, as_expr, derive, evaluate_many, func

__all__ = [
    "Chart",
    "GridSpec",
    "VectorField",
    "OneForm",
    "MetricField",
    "KernelOfForm",
    "Span",
    "Distribution",
    "Frame",
    "DegenerateError",
    "MetricError",
    "ContactReport",
    "TransversalityReport",
    "lie_bracket",
    "metric_pair",
    "contact_invariant",
    "defining_form",
    "check_contact",
    "check_transverse_pair",
    "gram_schmidt_adapted",
    "frame_metric",
    "cross",
]


class DegenerateError(ValueError):
    """A distribution, frame or form is degenerate at some point."""

    def __init__(self, message: str, point=None):
        self.point = None if point is None else tuple(float(x) for x in point)
        if self.point is not None:
            message = f"{message} at u = ({', '.join(f'{x:.6g}' for x in self.point)})"
        super().__init__(message)


class MetricError(ValueError):
    """The metric is singular or not positive-definite."""


@dataclass(frozen=True)
class Chart:
    """Coordinate box ``[min, max]`` per axis; periodic axes wrap mod ``max - min``."""

    lows: tuple[float, float, float]
    highs: tuple[float, float, float]
    periodic: tuple[bool, bool, bool] = (False, False, False)

    def __post_init__(self):
        for lo, hi in zip(self.lows, self.highs):
            if not lo < hi:
                raise ValueError(f"chart axis needs min < max, got [{lo}, {hi}]")

    @classmethod
    def box(cls, lo, hi, periodic=False):
        return cls((lo,) * 3, (hi,) * 3, (periodic,) * 3)

    def wrap(self, points):
        pts = np.array(points, dtype=float, copy=True)
        for k in range(3):
            if self.periodic[k]:
                lo, hi = self.lows[k], self.highs[k]
                pts[..., k] = lo + np.mod(pts[..., k] - lo, hi - lo)
        return pts

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = self.wrap(points)
        lo = np.asarray(self.lows) - tol
        hi = np.asarray(self.highs) + tol
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    def sample(self, n: int, rng: np.random.Generator, margin: float = 0.0) -> np.ndarray:
        lo = np.asarray(self.lows, dtype=float)
        hi = np.asarray(self.highs, dtype=float)
        pad = margin * (hi - lo)
        return rng.uniform(lo + pad, hi - pad, size=(n, 3))


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice with ``n`` samples per axis; periodic axes omit the endpoint."""

    n: int = 16

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("grid needs at least one sample per axis")

    def axes(self, chart: Chart) -> list[np.ndarray]:
        out = []
        for lo, hi, per in zip(chart.lows, chart.highs, chart.periodic):
            if self.n == 1:
                out.append(np.array([0.5 * (lo + hi)]))
            else:
                out.append(np.linspace(lo, hi, self.n, endpoint=not per))
        return out

    def points(self, chart: Chart) -> np.ndarray:
        a1, a2, a3 = self.axes(chart)
        mesh = np.meshgrid(a1, a2, a3, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def refined(self) -> "GridSpec":
        return GridSpec(2 * self.n)


Exprish = Union[ScalarExpr, str, float, int]


def _triple(items) -> tuple[ScalarExpr, ScalarExpr, ScalarExpr]:
    items = tuple(as_expr(c) for c in items)
    if len(items) != 3:
        raise ValueError(f"expected 3 components, got {len(items)}")
    return items


@dataclass(frozen=True, eq=False)
class VectorField:
    """Components in the coordinate basis ``d/du1, d/du2, d/du3``."""

    components: tuple[ScalarExpr, ScalarExpr, ScalarExpr]

    def __init__(self, *components):
        if len(components) == 1:
            components = components[0]
        object.__setattr__(self, "components", _triple(components))

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField([a + b for a, b in zip(self, other)])

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField([a - b for a, b in zip(self, other)])

    def __neg__(self) -> "VectorField":
        return VectorField([-a for a in self])

    def __mul__(self, s) -> "VectorField":
        s = as_expr(s)
        return VectorField([a * s for a in self])

    __rmul__ = __mul__

    def __truediv__(self, s) -> "VectorField":
        s = as_expr(s)
        return VectorField([a / s for a in self])

    def apply(self, f) -> ScalarExpr:
        """Directional derivative ``V(f)``."""
        f = as_expr(f)
        out = ZERO
        for i, vi in enumerate(self.components):
            if vi is not ZERO:
                out = out + vi * derive(f, i + 1)
        return out

    def evaluate(self, points) -> np.ndarray:
        return np.stack(evaluate_many(self.components, points), axis=-1)

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"


@dataclass(frozen=True, eq=False)
class OneForm:
    """Coefficients of ``du1, du2, du3``."""

    components: tuple[ScalarExpr, ScalarExpr, ScalarExpr]

    def __init__(self, *components):
        if len(components) == 1:
            components = components[0]
        object.__setattr__(self, "components", _triple(components))

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __call__(self, v: VectorField) -> ScalarExpr:
        out = ZERO
        for a, b in zip(self.components, v.components):
            out = out + a * b
        return out

    def evaluate(self, points) -> np.ndarray:
        return np.stack(evaluate_many(self.components, points), axis=-1)


_IDX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
METRIC_KEYS = ("g11", "g12", "g13", "g22", "g23", "g33")


@dataclass(frozen=True, eq=False)
class MetricField:
    """Symmetric metric stored as its upper triangle ``g11 g12 g13 g22 g23 g33``."""

    entries: tuple[ScalarExpr, ...]

    def __init__(self, entries):
        if isinstance(entries, dict):
            missing = [k for k in METRIC_KEYS if k not in entries]
            if missing:
                raise ValueError(f"metric is missing entries {missing}")
            entries = [entries[k] for k in METRIC_KEYS]
        entries = tuple(as_expr(e) for e in entries)
        if len(entries) != 6:
            raise ValueError("a metric needs 6 upper-triangular entries")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def euclidean(cls) -> "MetricField":
        return cls([ONE, ZERO, ZERO, ONE, ZERO, ONE])

    @classmethod
    def from_matrix(cls, m) -> "MetricField":
        return cls([as_expr(m[i][j]) for i, j in _IDX])

    @classmethod
    def conformal(cls, factor) -> "MetricField":
        f = as_expr(factor)
        return cls([f, ZERO, ZERO, f, ZERO, f])

    def __getitem__(self, ij) -> ScalarExpr:
        i, j = sorted(ij)
        return self.entries[_IDX.index((i, j))]

    @property
    def matrix(self) -> tuple[tuple[ScalarExpr, ...], ...]:
        return tuple(tuple(self[i, j] for j in range(3)) for i in range(3))

    def lower(self, v: VectorField) -> OneForm:
        m = self.matrix
        return OneForm([sum((m[i][j] * v[j] for j in range(3)), ZERO) for i in range(3)])

    def pair(self, s: VectorField, t: VectorField) -> ScalarExpr:
        return self.lower(s)(t)

    def norm(self, v: VectorField) -> ScalarExpr:
        return func("sqrt", self.pair(v, v))

    def det(self) -> ScalarExpr:
        return _det3(self.matrix)

    def adjugate(self):
        return _adj3(self.matrix)

    def raise_index(self, alpha: OneForm) -> VectorField:
        """``g^{-1} alpha`` in closed form (via the adjugate)."""
        adj = self.adjugate()
        d = self.det()
        return VectorField([sum((adj[i][j] * alpha[j] for j in range(3)), ZERO) / d for i in range(3)])

    def scaled(self, rho) -> "MetricField":
        r = as_expr(rho)
        return MetricField([r * e for e in self.entries])

    def __add__(self, other: "MetricField") -> "MetricField":
        return MetricField([a + b for a, b in zip(self.entries, other.entries)])

    def evaluate(self, points) -> np.ndarray:
        vals = evaluate_many(self.entries, points)
        shape = np.shape(vals[0])
        out = np.empty(shape + (3, 3))
        for (i, j), v in zip(_IDX, vals):
            out[..., i, j] = v
            out[..., j, i] = v
        return out

    def check_positive_definite(self, points) -> None:
        """Raise :class:`MetricError` unless all leading principal minors are > 0."""
        g = self.evaluate(np.atleast_2d(points))
        m1 = g[..., 0, 0]
        m2 = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        m3 = np.linalg.det(g)
        bad = ~((m1 > 0) & (m2 > 0) & (m3 > 0))
        if np.any(bad):
            k = int(np.argmax(bad))
            p = np.atleast_2d(points)[k]
            raise MetricError(
                "metric is not positive-definite at u = (" + ", ".join(f"{x:.6g}" for x in p) + ")"
            )


def _det3(m) -> ScalarExpr:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def _adj3(m):
    def cof(i, j):
        r = [k for k in range(3) if k != i]
        c = [k for k in range(3) if k != j]
        minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
        return minor if (i + j) % 2 == 0 else -minor

    # adj[i][j] = cofactor(j, i)
    return tuple(tuple(cof(j, i) for j in range(3)) for i in range(3))


def cross(a: Sequence[ScalarExpr], b: Sequence[ScalarExpr]) -> tuple[ScalarExpr, ScalarExpr, ScalarExpr]:
    """Component-wise cross product of coefficient triples (no metric involved)."""
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


@dataclass(frozen=True, eq=False)
class KernelOfForm:
    form: OneForm
    form_name: str | None = None


@dataclass(frozen=True, eq=False)
class Span:
    first: VectorField
    second: VectorField


Distribution = Union[KernelOfForm, Span]


@dataclass(frozen=True, eq=False)
class Frame:
    """Ordered triple ``(X, Y, n)``; ``metric`` is set when the frame is orthonormal for it."""

    X: VectorField
    Y: VectorField
    n: VectorField
    metric: MetricField | None = None

    def __iter__(self):
        return iter((self.X, self.Y, self.n))

    def evaluate(self, points) -> np.ndarray:
        """Array ``(..., 3, 3)`` whose last index runs over X, Y, n."""
        comps = [c for v in (self.X, self.Y, self.n) for c in v.components]
        vals = evaluate_many(comps, points)
        shape = np.shape(vals[0])
        return np.stack(vals, axis=-1).reshape(shape + (3, 3))

    def gram_deviation(self, g: MetricField, points) -> float:
        vecs = self.evaluate(points)
        G = g.evaluate(points)
        gram = np.einsum("...ai,...ij,...bj->...ab", vecs, G, vecs)
        return float(np.max(np.abs(gram - np.eye(3))))


def lie_bracket(S: VectorField, T: VectorField) -> VectorField:
    """``[S, T]^k = S(T^k) - T(S^k)``."""
    return VectorField([S.apply(T[k]) - T.apply(S[k]) for k in range(3)])


def metric_pair(g: MetricField, S: VectorField, T: VectorField, point) -> float:
    return evaluate_many([g.pair(S, T)], point)[0]


def contact_invariant(alpha: OneForm) -> ScalarExpr:
    """The coefficient ``c`` in ``alpha ^ d alpha = c du1 ^ du2 ^ du3``."""
    a = alpha.components
    curl = (
        derive(a[2], 2) - derive(a[1], 3),
        derive(a[0], 3) - derive(a[2], 1),
        derive(a[1], 1) - derive(a[0], 2),
    )
    return a[0] * curl[0] + a[1] * curl[1] + a[2] * curl[2]


def defining_form(d: Distribution) -> OneForm:
    """A 1-form whose kernel is ``d`` (for spans, the coefficient cross product)."""
    if isinstance(d, KernelOfForm):
        return d.form
    return OneForm(cross(d.first.components, d.second.components))


def _default_points(chart: Chart | None, grid: GridSpec | None) -> np.ndarray:
    if chart is None:
        return GridSpec(grid.n if grid else 5).points(Chart.box(-1.0, 1.0))
    return (grid or GridSpec()).points(chart)


def _check_independent(d: Distribution, points: np.ndarray) -> None:
    if isinstance(d, KernelOfForm):
        vals = d.form.evaluate(points)
        mag = np.linalg.norm(vals, axis=-1)
        if np.any(mag < 1e-12):
            k = int(np.argmin(mag))
            raise DegenerateError("defining form vanishes", points[k])
        return
    s = d.first.evaluate(points)
    t = d.second.evaluate(points)
    ns = np.linalg.norm(s, axis=-1)
    nt = np.linalg.norm(t, axis=-1)
    with np.errstate(all="ignore"):
        sine = np.linalg.norm(np.cross(s, t), axis=-1) / (ns * nt)
    sine = np.where(np.isfinite(sine), sine, 0.0)
    if np.any(sine < 1e-10):
        k = int(np.argmin(sine))
        raise DegenerateError("spanning fields are parallel", points[k])


@dataclass
class ContactReport:
    min_abs: float
    is_contact: bool
    sign: int
    argmin: tuple[float, float, float]
    bracket_min_abs: float | None = None
    bracket_sign: int | None = None


CONTACT_MARGIN = 1e-9


def _sign_of(values: np.ndarray) -> int:
    if np.all(values > CONTACT_MARGIN):
        return 1
    if np.all(values < -CONTACT_MARGIN):
        return -1
    return 0


def check_contact(
    d: Distribution,
    chart: Chart,
    grid: GridSpec | None = None,
    metric: MetricField | None = None,
) -> ContactReport:
    """Decide on a grid whether ``d`` is a contact structure.

    The form invariant ``alpha ^ d alpha`` decides; for spans (or when a metric
    is given) the bracket scalar ``<[X, Y], n>`` of a Gram-Schmidt frame is
    reported as well.  With a positively oriented orthonormal frame and
    ``alpha(n) > 0`` the two have opposite signs, since
    ``d alpha(X, Y) = -alpha([X, Y])``.
    """
    points = (grid or GridSpec()).points(chart)
    _check_independent(d, points)
    c = evaluate_many([contact_invariant(defining_form(d))], points)[0]
    absval = np.abs(c)
    k = int(np.argmin(absval))
    sign = _sign_of(c)
    report = ContactReport(
        min_abs=float(absval[k]),
        is_contact=bool(absval[k] >= CONTACT_MARGIN and sign != 0),
        sign=sign,
        argmin=tuple(float(x) for x in points[k]),
    )
    if isinstance(d, Span) or metric is not None:
        g = metric or MetricField.euclidean()
        frame = gram_schmidt_adapted(g, d, chart=chart, grid=grid)
        b = evaluate_many([g.pair(lie_bracket(frame.X, frame.Y), frame.n)], points)[0]
        report.bracket_min_abs = float(np.min(np.abs(b)))
        report.bracket_sign = _sign_of(b)
    return report


@dataclass
class TransversalityReport:
    min_transversality: float
    is_bicontact: bool
    first: ContactReport
    second: ContactReport


def check_transverse_pair(d1: Distribution, d2: Distribution, chart: Chart, grid: GridSpec | None = None):
    """Bi-contact test: both contact, opposite signs, planes transverse everywhere.

    Transversality is the sine of the angle between the defining covectors, so
    it is invariant under rescaling of either form.
    """
    points = (grid or GridSpec()).points(chart)
    r1 = check_contact(d1, chart, grid)
    r2 = check_contact(d2, chart, grid)
    a = defining_form(d1).evaluate(points)
    b = defining_form(d2).evaluate(points)
    with np.errstate(all="ignore"):
        t = np.linalg.norm(np.cross(a, b), axis=-1) / (
            np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
        )
    t = np.where(np.isfinite(t), t, 0.0)
    margin = float(np.min(t))
    ok = r1.is_contact and r2.is_contact and r1.sign == -r2.sign and margin > 1e-12
    return TransversalityReport(margin, bool(ok), r1, r2)


def _kernel_pair(alpha: OneForm, points: np.ndarray) -> tuple[VectorField, VectorField]:
    """Two independent closed-form vectors spanning ``ker alpha``.

    Pick the coordinate axis ``e_k`` least aligned with ``alpha`` over the
    sample points (lowest index on ties), then use ``alpha x e_k`` and
    ``alpha x (alpha x e_k)``; both are total and independent wherever
    ``alpha`` is not parallel to ``e_k``.
    """
    vals = alpha.evaluate(points)
    mag = np.linalg.norm(vals, axis=-1)
    if np.any(mag < 1e-12):
        k = int(np.argmin(mag))
        raise DegenerateError("defining form vanishes", points[k])
    align = np.max(np.abs(vals) / mag[:, None], axis=0)
    axis = 0
    for k in (1, 2):
        if align[k] < align[axis] - 1e-12:
            axis = k
    if align[axis] > 1.0 - 1e-9:
        k = int(np.argmax(np.abs(vals[:, axis]) / mag))
        raise DegenerateError("no coordinate axis stays transverse to the form", points[k])
    e = [ZERO, ZERO, ZERO]
    e[axis] = ONE
    v1 = cross(alpha.components, e)
    v2 = cross(alpha.components, v1)
    return VectorField(v1), VectorField(v2)


def gram_schmidt_adapted(
    g: MetricField,
    d: Distribution,
    chart: Chart | None = None,
    grid: GridSpec | None = None,
) -> Frame:
    """Orthonormal ``(X, Y, n)`` with ``X, Y`` spanning ``d``, in closed form.

    ``n`` is the unit normal making ``(X, Y, n)`` positively oriented in chart
    coordinates.  Nondegeneracy is checked on the chart grid (or a small box
    around the origin when no chart is given).
    """
    points = _default_points(chart, grid)
    g.check_positive_definite(points)
    _check_independent(d, points)
    if isinstance(d, KernelOfForm):
        S, T = _kernel_pair(d.form, points)
    else:
        S, T = d.first, d.second
    X = S / g.norm(S)
    T_perp = T - X * g.pair(T, X)
    Y = T_perp / g.norm(T_perp)
    w = cross(X.components, Y.components)
    # for g-orthonormal X, Y the covector w = X x Y has w^T g^-1 w = 1/det g
    adj = g.adjugate()
    scale = func("sqrt", g.det())
    n = VectorField([sum((adj[i][j] * w[j] for j in range(3)), ZERO) / scale for i in range(3)])
    return Frame(X, Y, n, metric=g)


def frame_metric(frame: Frame) -> MetricField:
    """The metric in which ``frame`` is orthonormal: ``F^{-T} F^{-1}``."""
    F = [[frame.X[i], frame.Y[i], frame.n[i]] for i in range(3)]
    adj = _adj3(F)
    det = _det3(F)
    inv = [[adj[i][j] / det for j in range(3)] for i in range(3)]
    m = [[sum((inv[k][i] * inv[k][j] for k in range(3)), ZERO) for j in range(3)] for i in range(3)]
    return MetricField.from_matrix(m)
