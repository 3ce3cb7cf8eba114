"""Estimator-style wrappers for use in numeric pipelines.

``DistributionCurvature`` is a transformer from chart points to curvature
columns; ``CurvaturePrescriber`` fits a stretched metric to a target and
predicts the measured curvature of the fitted metric.  Both follow the
scikit-learn parameter conventions (``get_params``/``set_params``, trailing
underscore for fitted state).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._parallel import map_chunks
from .expr import as_expr, evaluate_many
from .fields import GridSpec, gram_schmidt_adapted
from .framecalc import stretch_metric
from .models import Model, resolve_model
from .prescribe import PrescriptionProblem, prescribe, verify_prescription
from .riemann import frame_curvatures, sectional_oracle

__all__ = ["check_points", "DistributionCurvature", "CurvaturePrescriber", "COLUMNS"]

COLUMNS = ("K", "Ke", "KG", "c", "B_XX", "B_XY", "B_YY")


def check_points(points, chart=None) -> np.ndarray:
    """Validate an ``(N, 3)`` array of finite chart points (a single point is promoted).

    Points outside a non-periodic chart axis raise ``ValueError``; periodic axes are wrapped.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected points of shape (N, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain NaN or infinity")
    if chart is not None:
        pts = chart.wrap(pts)
        inside = chart.contains(pts)
        if not np.all(inside):
            bad = pts[int(np.argmin(inside))]
            raise ValueError(f"point {tuple(bad)} lies outside the chart")
    return pts


def _model(ref) -> Model:
    return ref if isinstance(ref, Model) else resolve_model(ref)


class DistributionCurvature(TransformerMixin, BaseEstimator):
    """Map points to ``K, Ke, KG, c, B_XX, B_XY, B_YY`` of a model distribution.

    ``stretch`` optionally stretches the metric along the unit normal first.
    """

    def __init__(self, model="t3-propeller", distribution="xi", stretch=None, threads=None):
        self.model = model
        self.distribution = distribution
        self.stretch = stretch
        self.threads = threads

    def fit(self, X=None, y=None):
        m = _model(self.model)
        if not m.has_chart:
            raise ValueError(f"model {m.name!r} has no chart")
        g = m.metric
        d = m.distribution(self.distribution)
        frame = gram_schmidt_adapted(g, d, chart=m.chart)
        if self.stretch is not None:
            g = stretch_metric(g, frame.n, as_expr(self.stretch), points=m.grid_points())
            frame = gram_schmidt_adapted(g, d, chart=m.chart)
        self.model_ = m
        self.metric_ = g
        self.frame_ = frame
        return self

    def transform(self, X):
        check_is_fitted(self, "frame_")
        pts = check_points(X, self.model_.chart)
        return map_chunks(lambda b: frame_curvatures(self.metric_, self.frame_, b).rows(), pts, self.threads)

    def get_feature_names_out(self, input_features=None):
        return np.array(COLUMNS, dtype=object)


class CurvaturePrescriber(BaseEstimator):
    """Fit a metric whose plane-field curvature equals ``target``.

    ``fit`` runs the chosen pipeline and stores ``a_``, ``D0_``, ``lambda_``,
    ``rho_``, ``metric_``, ``frame_`` and ``residuals_``.  ``predict`` returns
    the oracle-measured curvature of the fitted metric (sectional ``K`` or
    Gaussian ``K_G`` according to ``method``), which matches ``target``.
    """

    def __init__(
        self,
        target="-1",
        method="sectional",
        eta=None,
        frame=None,
        grid=16,
        delta_disc=0.1,
        delta_neg=1e-3,
        tol=1e-4,
    ):
        self.target = target
        self.method = method
        self.eta = eta
        self.frame = frame
        self.grid = grid
        self.delta_disc = delta_disc
        self.delta_neg = delta_neg
        self.tol = tol

    def fit(self, model, distribution="xi"):
        problem = PrescriptionProblem(
            _model(model),
            distribution,
            as_expr(self.target),
            self.method,
            grid=GridSpec(int(self.grid)),
            delta_disc=self.delta_disc,
            delta_neg=self.delta_neg,
            eta=self.eta,
            frame=self.frame,
            tol=self.tol,
        )
        result = prescribe(problem)
        self.problem_ = problem
        self.result_ = result
        self.a_ = result.a
        self.D0_ = result.D0
        self.lambda_ = result.lam
        self.rho_ = result.rho
        self.metric_ = result.g_final
        self.frame_ = result.frame
        self.residuals_ = result.residuals
        return self

    def predict(self, X):
        check_is_fitted(self, "metric_")
        pts = check_points(X, self.problem_.model.chart)
        if self.problem_.method == "gaussian":
            return frame_curvatures(self.metric_, self.frame_, pts).KG
        return sectional_oracle(self.metric_, self.frame_.X, self.frame_.Y, pts)

    def stretch_field(self, X):
        """Values of the fitted stretch factor ``a`` at points."""
        check_is_fitted(self, "a_")
        return evaluate_many([self.a_], check_points(X, self.problem_.model.chart))[0]

    def score(self, X, y=None):
        """Negative max deviation of the measured curvature from the target."""
        pts = check_points(X, self.problem_.model.chart)
        target = evaluate_many([as_expr(self.target)], pts)[0]
        return -float(np.max(np.abs(self.predict(pts) - target)))

    def verify(self):
        check_is_fitted(self, "result_")
        return verify_prescription(self.result_, self.problem_)
