"""Built-in chart models and the JSON model format.

A model file looks like::

    {"name": "t3-propeller",
     "domain": [[0, 6.283185307179586, true], [0, 6.283185307179586, true], [0, 6.283185307179586, true]],
     "metric": {"g11": "1", "g12": "0", "g13": "0", "g22": "1", "g23": "0", "g33": "1"},
     "one_forms": {"alpha": ["cos(u3)", "-sin(u3)", "1"]},
     "distributions": {"xi": {"kernel": "alpha"}, "plane": {"span": [["1","0","0"], ["0","1","0"]]}},
     "frames": {"F": {"X": [...], "Y": [...], "n": [...]}}}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expr import ExprError, as_expr, evaluate_many
from .fields import (
    METRIC_KEYS,
    Chart,
    DegenerateError,
    Distribution,
    Frame,
    GridSpec,
    KernelOfForm,
    MetricField,
    OneForm,
    Span,
    VectorField,
    _check_independent,
)
from .framecalc import FrameData

__all__ = ["Model", "SchemaError", "BUILTIN_NAMES", "builtin", "load_model", "dump_model", "resolve_model"]

TWO_PI = 2.0 * math.pi


class SchemaError(ValueError):
    def __init__(self, field_name: str, reason: str):
        self.field = field_name
        self.reason = reason
        super().__init__(f"{field_name}: {reason}")


@dataclass(frozen=True, eq=False)
class Model:
    name: str
    chart: Chart | None
    metric: MetricField | None
    one_forms: dict[str, OneForm] = field(default_factory=dict)
    distributions: dict[str, Distribution] = field(default_factory=dict)
    frames: dict[str, Frame] = field(default_factory=dict)
    frame_data: FrameData | None = None
    description: str = ""

    @property
    def has_chart(self) -> bool:
        return self.chart is not None and self.metric is not None

    def distribution(self, name: str) -> Distribution:
        try:
            return self.distributions[name]
        except KeyError:
            known = ", ".join(sorted(self.distributions)) or "none"
            raise KeyError(f"model {self.name!r} has no distribution {name!r} (known: {known})") from None

    def grid_points(self, grid: GridSpec | None = None) -> np.ndarray:
        return (grid or GridSpec()).points(self.chart)

    def validate(self, grid: GridSpec | None = None) -> None:
        """Load-time checks: metric positive-definite, forms nonvanishing,
        spans and frames independent, periodic axes consistent at the seam."""
        if not self.has_chart:
            return
        pts = self.grid_points(grid)
        self.metric.check_positive_definite(pts)
        for name, form in self.one_forms.items():
            vals = form.evaluate(pts)
            mag = np.linalg.norm(vals, axis=-1)
            if np.any(mag < 1e-12):
                raise DegenerateError(f"one-form {name!r} vanishes", pts[int(np.argmin(mag))])
        for name, d in self.distributions.items():
            try:
                _check_independent(d, pts)
            except DegenerateError as exc:
                raise DegenerateError(f"distribution {name!r}: {exc.args[0].split(' at u')[0]}", exc.point) from None
        for name, fr in self.frames.items():
            det = np.linalg.det(fr.evaluate(pts))
            if np.any(np.abs(det) < 1e-12):
                raise DegenerateError(f"frame {name!r} is degenerate", pts[int(np.argmin(np.abs(det)))])
        self._check_periodic(pts)

    def _all_exprs(self):
        out = list(self.metric.entries)
        for form in self.one_forms.values():
            out.extend(form.components)
        for d in self.distributions.values():
            if isinstance(d, Span):
                out.extend(d.first.components)
                out.extend(d.second.components)
        for fr in self.frames.values():
            for v in fr:
                out.extend(v.components)
        return out

    def _check_periodic(self, pts) -> None:
        exprs = self._all_exprs()
        for k in range(3):
            if not self.chart.periodic[k]:
                continue
            lo = pts[pts[:, k] == self.chart.lows[k]]
            if len(lo) == 0:
                continue
            hi = lo.copy()
            hi[:, k] = self.chart.highs[k]
            a = np.array(evaluate_many(exprs, lo))
            b = np.array(evaluate_many(exprs, hi))
            bad = np.abs(a - b) > 1e-9 * (1.0 + np.abs(a))
            if np.any(bad):
                j = int(np.argwhere(bad)[0][1])
                raise DegenerateError(f"expression not periodic along u{k + 1}", lo[j])


# -- built-ins --------------------------------------------------------------

def _t3_chart():
    return Chart((0.0,) * 3, (TWO_PI,) * 3, (True,) * 3)


def _propeller() -> Model:
    alpha = OneForm("cos(u3)", "-sin(u3)", "1")
    beta = OneForm("cos(u3)", "sin(u3)", "0")
    frame = Frame(
        VectorField("-sin(u3)", "cos(u3)", "sin(2*u3)"),
        VectorField("cos(u3)", "sin(u3)", "-cos(2*u3)"),
        VectorField(0, 0, 1),
    )
    return Model(
        "t3-propeller",
        _t3_chart(),
        MetricField.euclidean(),
        {"alpha": alpha, "beta": beta},
        {"xi": KernelOfForm(alpha, "alpha"), "eta": KernelOfForm(beta, "beta")},
        {"bicontact": frame},
        description="propeller bi-contact pair on the 3-torus; X spans xi & eta, Y in xi, n in eta",
    )


def _flat_foliation() -> Model:
    theta = OneForm(0, 0, 1)
    return Model(
        "t3-flat-foliation",
        _t3_chart(),
        MetricField.euclidean(),
        {"theta": theta},
        {"xi": KernelOfForm(theta, "theta")},
        description="integrable baseline: horizontal planes on the flat 3-torus",
    )


def _heisenberg() -> Model:
    alpha = OneForm("-u2", 0, 1)
    return Model(
        "r3-heisenberg",
        Chart.box(-1.0, 1.0),
        MetricField.euclidean(),
        {"alpha": alpha},
        {"xi": KernelOfForm(alpha, "alpha")},
        description="standard contact structure du3 - u2 du1 on a box",
    )


# round S^3 through stereographic projection from (0,0,0,1); the plane field is
# spanned by two pushed-forward invariant fields of S^3, which the round metric
# keeps orthonormal
_S3_FACTOR = "4/(1 + u1^2 + u2^2 + u3^2)^2"
_S3_ALPHA = (
    "4*(u1*u3 - u2)/(1 + u1^2 + u2^2 + u3^2)^2",
    "4*(u1 + u2*u3)/(1 + u1^2 + u2^2 + u3^2)^2",
    "2*(1 + u3^2 - u1^2 - u2^2)/(1 + u1^2 + u2^2 + u3^2)^2",
)
_S3_E1 = ("-u3 - u1*u2", "(u1^2 - u2^2 + u3^2 - 1)/2", "u1 - u2*u3")
_S3_E2 = ("(1 + u1^2 - u2^2 - u3^2)/2", "u1*u2 - u3", "u2 + u1*u3")
_S3_REEB = ("u1*u3 - u2", "u1 + u2*u3", "(1 + u3^2 - u1^2 - u2^2)/2")


def _s3_round() -> Model:
    alpha = OneForm(*_S3_ALPHA)
    e1, e2 = VectorField(*_S3_E1), VectorField(*_S3_E2)
    return Model(
        "s3-round",
        Chart.box(-2.0, 2.0),
        MetricField.conformal(_S3_FACTOR),
        {"alpha": alpha},
        {"xi": Span(e1, e2)},
        {"invariant": Frame(e1, e2, VectorField(*_S3_REEB))},
        description="unit S^3 (stereographic chart) with its standard contact structure",
    )


def _hyperbolic() -> Model:
    theta = OneForm(0, 0, 1)
    return Model(
        "hyperbolic-halfspace",
        Chart((-1.0, -1.0, 0.5), (1.0, 1.0, 2.0)),
        MetricField.conformal("1/u3^2"),
        {"theta": theta},
        {"xi": KernelOfForm(theta, "theta")},
        description="upper half-space model of H^3; xi tangent to horospheres",
    )


def _su2() -> Model:
    # [X,Y] = 2n, [Y,n] = 2X, [n,X] = 2Y with (X, Y, n) orthonormal
    return Model(
        "su2-constants",
        None,
        None,
        frame_data=FrameData(c=2.0, bXn_Y=-2.0, bYn_X=2.0),
        description="homogeneous su(2) bracket constants (no chart)",
    )


_BUILDERS = {
    "t3-propeller": _propeller,
    "t3-flat-foliation": _flat_foliation,
    "r3-heisenberg": _heisenberg,
    "s3-round": _s3_round,
    "hyperbolic-halfspace": _hyperbolic,
    "su2-constants": _su2,
}
BUILTIN_NAMES = tuple(_BUILDERS)
CHART_BUILTINS = tuple(n for n in BUILTIN_NAMES if n != "su2-constants")
_cache: dict[str, Model] = {}


def builtin(name: str) -> Model:
    if name not in _BUILDERS:
        raise KeyError(f"unknown model {name!r}; builtins are {', '.join(BUILTIN_NAMES)}")
    if name not in _cache:
        _cache[name] = _BUILDERS[name]()
    return _cache[name]


# -- JSON -------------------------------------------------------------------

def _exprs(value, where: str, count: int):
    if not isinstance(value, list) or len(value) != count:
        raise SchemaError(where, f"expected a list of {count} expressions")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, (str, int, float)) or isinstance(item, bool):
            raise SchemaError(f"{where}[{i}]", "expected an expression string or number")
        try:
            out.append(as_expr(item))
        except ExprError as exc:
            raise SchemaError(f"{where}[{i}]", str(exc)) from None
    return out


def model_from_dict(data: dict, validate: bool = True) -> Model:
    if not isinstance(data, dict):
        raise SchemaError("<root>", "expected a JSON object")
    allowed = {"name", "domain", "metric", "one_forms", "distributions", "frames", "description"}
    extra = set(data) - allowed
    if extra:
        raise SchemaError(sorted(extra)[0], "unknown key")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaError("name", "required non-empty string")

    domain = data.get("domain")
    if not isinstance(domain, list) or len(domain) != 3:
        raise SchemaError("domain", "expected three [min, max, periodic?] entries")
    lows, highs, periodic = [], [], []
    for i, ax in enumerate(domain):
        if not isinstance(ax, list) or len(ax) not in (2, 3):
            raise SchemaError(f"domain[{i}]", "expected [min, max] or [min, max, periodic]")
        lo, hi = ax[0], ax[1]
        per = ax[2] if len(ax) == 3 else False
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (lo, hi)):
            raise SchemaError(f"domain[{i}]", "bounds must be numbers")
        if not isinstance(per, bool):
            raise SchemaError(f"domain[{i}]", "periodic flag must be a boolean")
        if not lo < hi:
            raise SchemaError(f"domain[{i}]", "min must be below max")
        lows.append(float(lo))
        highs.append(float(hi))
        periodic.append(per)
    chart = Chart(tuple(lows), tuple(highs), tuple(periodic))

    metric = data.get("metric")
    if not isinstance(metric, dict):
        raise SchemaError("metric", "expected an object with keys " + ", ".join(METRIC_KEYS))
    for key in metric:
        if key not in METRIC_KEYS:
            raise SchemaError(f"metric.{key}", "not an upper-triangular key (use " + ", ".join(METRIC_KEYS) + ")")
    for key in METRIC_KEYS:
        if key not in metric:
            raise SchemaError(f"metric.{key}", "missing")
    g = MetricField([_exprs([metric[k]], f"metric.{k}", 1)[0] for k in METRIC_KEYS])

    forms = {}
    for fname, comps in (data.get("one_forms") or {}).items():
        forms[fname] = OneForm(_exprs(comps, f"one_forms.{fname}", 3))

    dists = {}
    for dname, entry in (data.get("distributions") or {}).items():
        where = f"distributions.{dname}"
        if not isinstance(entry, dict) or len(entry) != 1 or not ({"kernel", "span"} & set(entry)):
            raise SchemaError(where, 'expected {"kernel": form} or {"span": [v, w]}')
        if "kernel" in entry:
            ref = entry["kernel"]
            if ref not in forms:
                raise SchemaError(where, f"unknown one-form {ref!r}")
            dists[dname] = KernelOfForm(forms[ref], ref)
        else:
            pair = entry["span"]
            if not isinstance(pair, list) or len(pair) != 2:
                raise SchemaError(where, "span needs two vectors")
            dists[dname] = Span(
                VectorField(_exprs(pair[0], where + ".span[0]", 3)),
                VectorField(_exprs(pair[1], where + ".span[1]", 3)),
            )

    frames = {}
    for fname, entry in (data.get("frames") or {}).items():
        where = f"frames.{fname}"
        if not isinstance(entry, dict) or set(entry) != {"X", "Y", "n"}:
            raise SchemaError(where, "expected keys X, Y, n")
        frames[fname] = Frame(*(VectorField(_exprs(entry[k], f"{where}.{k}", 3)) for k in ("X", "Y", "n")))

    model = Model(name, chart, g, forms, dists, frames, description=str(data.get("description", "")))
    if validate:
        model.validate()
    return model


def load_model(path) -> Model:
    """Read a model file, compile its expressions and run the load-time checks."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<file>", f"invalid JSON: {exc}") from None
    return model_from_dict(data)


def dump_model(model: Model) -> dict:
    if not model.has_chart:
        raise ValueError(f"model {model.name!r} has no chart and cannot be serialized")
    ch = model.chart
    out = {
        "name": model.name,
        "domain": [[lo, hi, per] for lo, hi, per in zip(ch.lows, ch.highs, ch.periodic)],
        "metric": {k: str(e) for k, e in zip(METRIC_KEYS, model.metric.entries)},
        "one_forms": {k: [str(c) for c in f] for k, f in model.one_forms.items()},
        "distributions": {},
        "frames": {k: {"X": [str(c) for c in f.X], "Y": [str(c) for c in f.Y], "n": [str(c) for c in f.n]}
                   for k, f in model.frames.items()},
    }
    for k, d in model.distributions.items():
        if isinstance(d, KernelOfForm):
            ref = d.form_name or next((n for n, f in model.one_forms.items() if f is d.form), None)
            if ref is None:
                raise ValueError(f"distribution {k!r} references an unnamed form")
            out["distributions"][k] = {"kernel": ref}
        else:
            out["distributions"][k] = {"span": [[str(c) for c in d.first], [str(c) for c in d.second]]}
    if model.description:
        out["description"] = model.description
    return out


def resolve_model(ref: str) -> Model:
    """A builtin name or a path to a model file."""
    if ref in _BUILDERS:
        return builtin(ref)
    path = Path(ref)
    if path.exists():
        return load_model(path)
    raise KeyError(f"{ref!r} is neither a builtin model ({', '.join(BUILTIN_NAMES)}) nor a file")
