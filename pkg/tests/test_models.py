import json
import math

import numpy as np
import pytest

from distcurv.expr import evaluate_many
from distcurv.fields import DegenerateError, GridSpec, check_contact, check_transverse_pair, contact_invariant
from distcurv.framecalc import k_sectional_formula, stretch_coefficients
from distcurv.models import (
    BUILTIN_NAMES,
    CHART_BUILTINS,
    SchemaError,
    builtin,
    dump_model,
    load_model,
    model_from_dict,
    resolve_model,
)
from distcurv.riemann import sectional_oracle
from distcurv.validation import sample_points


def test_builtin_names():
    assert set(BUILTIN_NAMES) == {
        "t3-propeller", "t3-flat-foliation", "r3-heisenberg", "s3-round", "hyperbolic-halfspace", "su2-constants",
    }
    with pytest.raises(KeyError):
        builtin("klein-bottle")


@pytest.mark.parametrize("name", CHART_BUILTINS)
def test_builtins_validate(name):
    builtin(name).validate(GridSpec(8))


def test_propeller_frame_identities(rng):
    m = builtin("t3-propeller")
    fr = m.frames["bicontact"]
    alpha, beta = m.one_forms["alpha"], m.one_forms["beta"]
    pts = rng.uniform(0, 2 * math.pi, size=(100, 3))
    checks = {
        "alpha(X)": (alpha(fr.X), 0), "beta(X)": (beta(fr.X), 0), "alpha(Y)": (alpha(fr.Y), 0),
        "beta(Y)": (beta(fr.Y), 1), "beta(n)": (beta(fr.n), 0), "alpha(n)": (alpha(fr.n), 1),
    }
    for label, (e, want) in checks.items():
        got = evaluate_many([e], pts)[0]
        assert np.max(np.abs(got - want)) <= 1e-12, label


def test_flat_foliation_invariant_vanishes():
    assert contact_invariant(builtin("t3-flat-foliation").one_forms["theta"]).const_value == 0


def test_su2_berger_curvature():
    sc = stretch_coefficients(builtin("su2-constants").frame_data)
    for a in (0.25, 0.5, 1.0, 2.0, 4.0):
        assert k_sectional_formula(sc, a) == pytest.approx(4 - 3 * a, abs=1e-12)


def test_builtin_roles():
    grid = GridSpec(8)
    p = builtin("t3-propeller")
    assert check_transverse_pair(p.distribution("xi"), p.distribution("eta"), p.chart, grid).is_bicontact
    f = builtin("t3-flat-foliation")
    assert not check_contact(f.distribution("xi"), f.chart, grid).is_contact
    h = builtin("r3-heisenberg")
    assert check_contact(h.distribution("xi"), h.chart, grid).is_contact
    s = builtin("s3-round")
    assert check_contact(s.distribution("xi"), s.chart, grid).is_contact
    y = builtin("hyperbolic-halfspace")
    assert not check_contact(y.distribution("xi"), y.chart, grid).is_contact


def test_sphere_alpha_annihilates_the_plane_field(rng):
    s = builtin("s3-round")
    d = s.distribution("xi")
    pts = sample_points(s, 100, rng)
    alpha = s.one_forms["alpha"]
    for v in (d.first, d.second):
        np.testing.assert_allclose(evaluate_many([alpha(v)], pts)[0], 0, atol=1e-12)


def test_sphere_sectional_curvature(rng):
    s = builtin("s3-round")
    d = s.distribution("xi")
    pts = sample_points(s, 100, rng)
    assert np.all(np.linalg.norm(pts, axis=1) <= 1.5)
    np.testing.assert_allclose(sectional_oracle(s.metric, d.first, d.second, pts), 1, atol=1e-6)


@pytest.mark.parametrize("name", CHART_BUILTINS)
def test_json_round_trip(tmp_path, rng, name):
    m = builtin(name)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(dump_model(m)))
    back = load_model(path)
    pts = m.chart.sample(50, rng)
    np.testing.assert_allclose(back.metric.evaluate(pts), m.metric.evaluate(pts), rtol=1e-12, atol=1e-12)
    for k, form in m.one_forms.items():
        np.testing.assert_allclose(back.one_forms[k].evaluate(pts), form.evaluate(pts), atol=1e-12)
    for k, fr in m.frames.items():
        np.testing.assert_allclose(back.frames[k].evaluate(pts), fr.evaluate(pts), atol=1e-12)
    assert set(back.distributions) == set(m.distributions)
    assert resolve_model(str(path)).name == m.name


def _doc(**over):
    doc = {
        "name": "box",
        "domain": [[-1, 1], [-1, 1], [-1, 1]],
        "metric": {"g11": "1", "g12": "0", "g13": "0", "g22": "1", "g23": "0", "g33": "1"},
        "one_forms": {"alpha": ["-u2", "0", "1"]},
        "distributions": {"xi": {"kernel": "alpha"}},
    }
    doc.update(over)
    return doc


def test_schema_accepts_minimal_document():
    m = model_from_dict(_doc())
    assert m.distribution("xi") is not None


@pytest.mark.parametrize(
    "over, field",
    [
        ({"metric": {"g11": "1", "g21": "0", "g13": "0", "g22": "1", "g23": "0", "g33": "1"}}, "metric.g21"),
        ({"metric": {"g11": "1", "g13": "0", "g22": "1", "g23": "0", "g33": "1"}}, "metric.g12"),
        ({"domain": [[1, -1], [-1, 1], [-1, 1]]}, "domain[0]"),
        ({"domain": [[-1, 1], [-1, 1]]}, "domain"),
        ({"distributions": {"xi": {"kernel": "beta"}}}, "distributions.xi"),
        ({"one_forms": {"alpha": ["1", "sin("]}}, "one_forms.alpha"),
        ({"one_forms": {"alpha": ["1", "sin(", "0"]}}, "one_forms.alpha[1]"),
        ({"colour": "red"}, "colour"),
        ({"name": ""}, "name"),
    ],
)
def test_schema_errors_name_the_field(over, field):
    with pytest.raises(SchemaError) as info:
        model_from_dict(_doc(**over))
    assert info.value.field == field


def test_vanishing_form_names_the_point():
    doc = _doc(domain=[[0, 1], [0, 1], [0, 1]], one_forms={"alpha": ["u1", "u2", "u3"]})
    with pytest.raises(DegenerateError) as info:
        model_from_dict(doc)
    assert tuple(info.value.point) == (0.0, 0.0, 0.0)
    assert "alpha" in str(info.value)


def test_nonperiodic_expression_on_periodic_axis():
    doc = _doc(domain=[[0, 1, True], [0, 1], [0, 1]])
    doc["metric"]["g11"] = "1 + u1^2"
    with pytest.raises(DegenerateError, match="not periodic along u1"):
        model_from_dict(doc)


def test_indefinite_metric_rejected():
    doc = _doc()
    doc["metric"]["g22"] = "-1"
    with pytest.raises(ValueError):
        model_from_dict(doc)


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load_model(p)


def test_su2_cannot_be_serialized():
    with pytest.raises(ValueError):
        dump_model(builtin("su2-constants"))
