"""Coordinate Riemannian curvature computed directly from a metric.

This is the reference path: Christoffel symbols and the curvature tensor come
from exact first and second partials of the metric entries, never from frame
brackets, so it can arbitrate the closed-form stretch formulas.

All functions accept a single point of shape ``(3,)`` or a batch ``(N, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .expr import derive, evaluate_many
from .fields import (
    Distribution,
    Frame,
    MetricError,
    MetricField,
    VectorField,
    gram_schmidt_adapted,
    lie_bracket,
)

__all__ = [
    "CurvatureReport",
    "metric_jet",
    "christoffel",
    "curvature_tensor",
    "covariant_derivative",
    "sectional_oracle",
    "second_fundamental_form",
    "extrinsic_quotient",
    "distribution_curvatures",
    "frame_curvatures",
]

ORTHONORMAL_TOL = 1e-8


@lru_cache(maxsize=64)
def _jet_exprs(g: MetricField):
    first = [derive(e, m) for m in (1, 2, 3) for e in g.entries]
    second = [derive(derive(e, m), l) for m in (1, 2, 3) for l in (1, 2, 3) for e in g.entries]
    return list(g.entries) + first + second


_IDX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _batch(points):
    p = np.asarray(points, dtype=float)
    return np.atleast_2d(p), p.ndim == 1


def _unbatch(x, single):
    return x[0] if single else x


def metric_jet(g: MetricField, points):
    """Metric values and partials at ``points`` (batched).

    Returns ``G[N,i,j]``, ``dG[N,m,i,j] = d_m g_ij`` and
    ``ddG[N,m,l,i,j] = d_m d_l g_ij``.
    """
    pts, _ = _batch(points)
    vals = evaluate_many(_jet_exprs(g), pts)
    N = len(pts)
    G = np.empty((N, 3, 3))
    dG = np.empty((N, 3, 3, 3))
    ddG = np.empty((N, 3, 3, 3, 3))
    for s, (i, j) in enumerate(_IDX):
        G[:, i, j] = G[:, j, i] = vals[s]
        for m in range(3):
            v = vals[6 + 6 * m + s]
            dG[:, m, i, j] = dG[:, m, j, i] = v
            for l in range(3):
                w = vals[24 + 6 * (3 * m + l) + s]
                ddG[:, m, l, i, j] = ddG[:, m, l, j, i] = w
    return G, dG, ddG


def _inverse(G, pts):
    det = np.linalg.det(G)
    scale = np.max(np.abs(G), axis=(1, 2)) ** 3
    bad = ~(np.abs(det) > 1e-14 * scale)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise MetricError(f"singular metric at u = {tuple(pts[k])}")
    return np.linalg.inv(G)


def _connection(g: MetricField, pts):
    G, dG, ddG = metric_jet(g, pts)
    Ginv = _inverse(G, pts)
    # first kind: Gam1[l,i,j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    Gam1 = 0.5 * (
        np.einsum("nijl->nlij", dG) + np.einsum("njil->nlij", dG) - dG
    )
    Gam = np.einsum("nkl,nlij->nkij", Ginv, Gam1)
    dGam1 = 0.5 * (
        np.einsum("nmijl->nmlij", ddG) + np.einsum("nmjil->nmlij", ddG) - ddG
    )
    dGinv = -np.einsum("nka,nmab,nbl->nmkl", Ginv, dG, Ginv)
    dGam = np.einsum("nmkl,nlij->nmkij", dGinv, Gam1) + np.einsum("nkl,nmlij->nmkij", Ginv, dGam1)
    return G, Gam, dGam


def christoffel(g: MetricField, points) -> np.ndarray:
    """``Gamma[k, i, j]`` (Christoffel symbols of the second kind)."""
    pts, single = _batch(points)
    _, Gam, _ = _connection(g, pts)
    return _unbatch(Gam, single)


def _riemann(Gam, dGam):
    # R[n,l,i,j,k]:  R(d_i, d_j) d_k = R^l_ijk d_l;  dGam[n,m,k,i,j] = d_m Gamma^k_ij
    return (
        np.einsum("niljk->nlijk", dGam)
        - np.einsum("njlik->nlijk", dGam)
        + np.einsum("nlim,nmjk->nlijk", Gam, Gam)
        - np.einsum("nljm,nmik->nlijk", Gam, Gam)
    )


def curvature_tensor(g: MetricField, points):
    """``R[l, i, j, k]`` with ``R(d_i, d_j) d_k = R^l_ijk d_l`` and
    ``R(S, T) = [nabla_S, nabla_T] - nabla_[S, T]``.  Also returns the metric."""
    pts, single = _batch(points)
    G, Gam, dGam = _connection(g, pts)
    R = _riemann(Gam, dGam)
    return _unbatch(R, single), _unbatch(G, single)


def _values(v, pts):
    if isinstance(v, VectorField):
        return v.evaluate(pts)
    arr = np.asarray(v, dtype=float)
    return np.broadcast_to(arr, pts.shape)


def _vector_jet(v: VectorField, pts):
    exprs = list(v.components) + [derive(c, m) for c in v.components for m in (1, 2, 3)]
    vals = evaluate_many(exprs, pts)
    V = np.stack(vals[:3], axis=-1)
    dV = np.stack(vals[3:], axis=-1).reshape(len(pts), 3, 3)  # dV[n,k,m] = d_m V^k
    return V, dV


def _nabla(Gam, S, T, dT):
    return np.einsum("nkm,nm->nk", dT, S) + np.einsum("nkij,ni,nj->nk", Gam, S, T)


def covariant_derivative(g: MetricField, S, T: VectorField, points) -> np.ndarray:
    """``(nabla_S T)^k = S^i d_i T^k + Gamma^k_ij S^i T^j``."""
    pts, single = _batch(points)
    Gam = christoffel(g, pts)
    Sv = _values(S, pts)
    Tv, dT = _vector_jet(T, pts)
    return _unbatch(_nabla(Gam, Sv, Tv, dT), single)


def sectional_oracle(g: MetricField, S, T, points):
    """Sectional curvature of the plane spanned by ``S, T``."""
    pts, single = _batch(points)
    R, G = curvature_tensor(g, pts)
    Sv = _values(S, pts)
    Tv = _values(T, pts)
    num = np.einsum("npl,nlijk,ni,nj,nk,np->n", G, R, Sv, Tv, Tv, Sv)
    ss = np.einsum("ni,nij,nj->n", Sv, G, Sv)
    tt = np.einsum("ni,nij,nj->n", Tv, G, Tv)
    st = np.einsum("ni,nij,nj->n", Sv, G, Tv)
    den = ss * tt - st**2
    if np.any(den <= 1e-14 * ss * tt):
        k = int(np.argmin(den / (ss * tt)))
        raise ValueError(f"degenerate plane at u = {tuple(pts[k])}")
    return _unbatch(num / den, single)


def _check_orthonormal(frame: Frame, g: MetricField, pts):
    dev = frame.gram_deviation(g, pts)
    if dev > ORTHONORMAL_TOL:
        raise ValueError(f"frame is not orthonormal for the metric (Gram deviation {dev:.3g})")


def second_fundamental_form(g: MetricField, frame: Frame, points):
    """``(B_XX, B_XY, B_YY)`` with ``B(S, T) = 1/2 <nabla_S T + nabla_T S, n>``."""
    pts, single = _batch(points)
    _check_orthonormal(frame, g, pts)
    B = _second_form(g, frame, pts)
    return tuple(_unbatch(b, single) for b in B)


def _second_form(g, frame, pts, Gam=None, G=None):
    if Gam is None:
        Gam = christoffel(g, pts)
    if G is None:
        G = g.evaluate(pts)
    X, dX = _vector_jet(frame.X, pts)
    Y, dY = _vector_jet(frame.Y, pts)
    n = frame.n.evaluate(pts)
    nb = np.einsum("nij,nj->ni", G, n)
    bxx = np.einsum("ni,ni->n", _nabla(Gam, X, X, dX), nb)
    byy = np.einsum("ni,ni->n", _nabla(Gam, Y, Y, dY), nb)
    bxy = 0.5 * np.einsum("ni,ni->n", _nabla(Gam, X, Y, dY) + _nabla(Gam, Y, X, dX), nb)
    return bxx, bxy, byy


def extrinsic_quotient(g: MetricField, S: VectorField, T: VectorField, n: VectorField, points):
    """Extrinsic curvature from an arbitrary spanning pair and the unit normal ``n``.

    ``(B(S,S) B(T,T) - B(S,T)^2) / (|S|^2 |T|^2 - <S,T>^2)``.
    """
    pts, single = _batch(points)
    frame = Frame(S, T, n)
    Gam = christoffel(g, pts)
    G = g.evaluate(pts)
    bss, bst, btt = _second_form(g, frame, pts, Gam, G)
    Sv, Tv = S.evaluate(pts), T.evaluate(pts)
    ss = np.einsum("ni,nij,nj->n", Sv, G, Sv)
    tt = np.einsum("ni,nij,nj->n", Tv, G, Tv)
    st = np.einsum("ni,nij,nj->n", Sv, G, Tv)
    return _unbatch((bss * btt - bst**2) / (ss * tt - st**2), single)


@dataclass
class CurvatureReport:
    """Curvatures of a plane distribution at one point or a batch of points."""

    K: np.ndarray
    Ke: np.ndarray
    KG: np.ndarray
    B_XX: np.ndarray
    B_XY: np.ndarray
    B_YY: np.ndarray
    c: np.ndarray

    def rows(self) -> np.ndarray:
        return np.stack(
            [np.atleast_1d(x) for x in (self.K, self.Ke, self.KG, self.c, self.B_XX, self.B_XY, self.B_YY)],
            axis=-1,
        )


def frame_curvatures(g: MetricField, frame: Frame, points) -> CurvatureReport:
    """Curvatures of ``span(X, Y)`` using an orthonormal ``frame`` of ``g``."""
    pts, single = _batch(points)
    _check_orthonormal(frame, g, pts)
    R, G = curvature_tensor(g, pts)
    _, Gam, _ = _connection(g, pts)
    X = frame.X.evaluate(pts)
    Y = frame.Y.evaluate(pts)
    K = np.einsum("npl,nlijk,ni,nj,nk,np->n", G, R, X, Y, Y, X)
    bxx, bxy, byy = _second_form(g, frame, pts, Gam, G)
    Ke = bxx * byy - bxy**2
    c = evaluate_many([g.pair(lie_bracket(frame.X, frame.Y), frame.n)], pts)[0]
    out = [K, Ke, K + Ke, bxx, bxy, byy, c]
    return CurvatureReport(*[_unbatch(x, single) for x in out])


def distribution_curvatures(g: MetricField, d: Distribution, points, chart=None) -> CurvatureReport:
    """``K``, ``K_e``, ``K_G = K + K_e``, ``B`` and ``c`` of ``d`` in the metric ``g``."""
    frame = gram_schmidt_adapted(g, d, chart=chart)
    return frame_curvatures(g, frame, points)
