import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from distcurv import CurvaturePrescriber, DistributionCurvature, GridSpec, builtin, check_points
from distcurv.estimators import COLUMNS


def test_check_points_promotes_and_validates():
    assert check_points([0.1, 0.2, 0.3]).shape == (1, 3)
    with pytest.raises(ValueError, match="shape"):
        check_points(np.zeros((4, 2)))
    with pytest.raises(ValueError, match="NaN"):
        check_points([[0, np.nan, 0]])


def test_check_points_wraps_periodic_and_rejects_outside():
    torus = builtin("t3-propeller").chart
    wrapped = check_points([[2 * np.pi + 0.5, -0.25, 0.0]], torus)
    np.testing.assert_allclose(wrapped, [[0.5, 2 * np.pi - 0.25, 0.0]])
    half = builtin("hyperbolic-halfspace").chart
    with pytest.raises(ValueError, match="outside the chart"):
        check_points([[0.0, 0.0, -1.0]], half)


def test_params_round_trip_and_clone():
    est = DistributionCurvature(model="s3-round", stretch="2")
    assert est.get_params() == {"model": "s3-round", "distribution": "xi", "stretch": "2", "threads": None}
    est.set_params(stretch=None, threads=2)
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est
    pres = CurvaturePrescriber(target="-2+sin(u3)", grid=8)
    assert clone(pres).get_params()["target"] == "-2+sin(u3)"


def test_transform_requires_fit():
    with pytest.raises(NotFittedError):
        DistributionCurvature().transform([[0.0, 0.0, 0.0]])
    with pytest.raises(NotFittedError):
        CurvaturePrescriber().predict([[0.0, 0.0, 0.0]])


def test_transform_columns_on_horospheres():
    est = DistributionCurvature(model="hyperbolic-halfspace")
    pts = GridSpec(5).points(builtin("hyperbolic-halfspace").chart)
    out = est.fit_transform(pts)
    assert out.shape == (len(pts), len(COLUMNS))
    assert list(est.get_feature_names_out()) == list(COLUMNS)
    np.testing.assert_allclose(out[:, :3], np.tile([-1.0, 1.0, 0.0], (len(pts), 1)), atol=1e-9)


def test_transform_is_thread_count_independent():
    pts = builtin("t3-propeller").chart.sample(1500, np.random.default_rng(3))
    one = DistributionCurvature(threads=1).fit().transform(pts)
    four = DistributionCurvature(threads=4).fit().transform(pts)
    assert np.array_equal(one, four)


def test_stretch_parameter_moves_sectional_curvature():
    pts = np.array([[0.2, -0.3, 0.4], [0.5, 0.1, -0.2]])
    base = DistributionCurvature(model="s3-round", stretch="2").fit().transform(pts)
    np.testing.assert_allclose(base[:, 0], 4 - 3 * 2, atol=1e-8)


def test_transformer_in_pipeline():
    pts = builtin("t3-propeller").chart.sample(50, np.random.default_rng(1))
    z = make_pipeline(DistributionCurvature(distribution="eta"), StandardScaler()).fit_transform(pts)
    assert z.shape == (50, 7) and np.all(np.isfinite(z))


def test_prescriber_fit_predict_score():
    est = CurvaturePrescriber(target="-2+sin(u3)", grid=8).fit("t3-propeller", "eta")
    assert est.D0_ >= 1 and est.rho_ == est.D0_ and est.lambda_ == 1
    pts = builtin("t3-propeller").chart.sample(40, np.random.default_rng(5))
    np.testing.assert_allclose(est.predict(pts), -2 + np.sin(pts[:, 2]), atol=1e-8)
    assert np.all(est.stretch_field(pts) > 0)
    assert est.score(pts) <= 0 and -est.score(pts) < 1e-8
    assert est.verify().max <= 1e-4


def test_prescriber_gaussian_and_bicontact():
    g = CurvaturePrescriber(target="-1", method="gaussian", grid=8).fit("t3-propeller")
    assert np.max(np.abs(g.predict([[0.3, 0.2, 0.1]]) + 1)) < 1e-8
    b = CurvaturePrescriber(target="1", method="sectional-bicontact", eta="eta", grid=8).fit("t3-propeller")
    assert b.lambda_ != 1 and b.residuals_.max <= 1e-4
