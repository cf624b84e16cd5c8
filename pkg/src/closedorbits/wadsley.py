"""
Metric averaging over circle actions and Beltrami-type Euler metrics.

Given a circle action with generator ``Xt``, a metric is averaged over the
action (composite trapezoid rule in the angle), rescaled so that ``Xt`` has
unit length, and its dual one-form checked against the geodesible pair
``alpha(Xt) = 1``, ``i_Xt d alpha = 0``.  From a positive one-form ``alpha``
and a volume form ``mu`` one can then build a metric ``g`` with
``g(X, .) = alpha``, ``X`` orthogonal to ``ker alpha`` and Riemannian volume
``mu``; the curl is the field ``w`` solving ``i_w mu = (d alpha)^n``.

Submanifolds given in ambient coordinates (S^3 in R^4) are handled through an
optional ``frame``: a callable returning an ``(..., n, m)`` array whose
columns span the tangent space.  Forms and metrics are then only ever
evaluated on frame vectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, UnsupportedOperation
from .forms import (DEFAULT_H, KForm, MetricEval, VectorField, constant_form, eval_form,
                    exterior_derivative, fd_partials, interior_product, lie_derivative_metric,
                    wedge_power)

__all__ = [
    "CircleAction",
    "MetricEval",
    "average_metric",
    "killing_residual",
    "normalize_metric",
    "dual_one_form",
    "geodesibility_check",
    "build_euler_metric",
    "curl",
    "curl_from_form",
    "beltrami_residual",
]


@dataclass(frozen=True)
class CircleAction:
    """An action of the circle ``R / 2 pi Z`` on a chart.

    ``act(theta, p)`` returns the image point; ``jac(theta, p)`` its
    Jacobian in ``p`` (finite differences when omitted).
    """

    dim: int
    act: Callable
    generator: VectorField
    jac: Optional[Callable] = None
    name: str = ""

    def __call__(self, theta, p):
        return np.asarray(self.act(theta, p), dtype=float)

    def jacobian(self, theta, p, h=DEFAULT_H):
        if self.jac is not None:
            return np.broadcast_to(np.asarray(self.jac(theta, p), dtype=float),
                                   np.shape(p)[:-1] + (self.dim, self.dim))
        return fd_partials(lambda q: self.act(theta, q), p, h)


def _frame_or_identity(frame, p, n):
    if frame is None:
        return np.broadcast_to(np.eye(n), np.shape(p)[:-1] + (n, n))
    return np.asarray(frame(p), dtype=float)


def average_metric(g1: MetricEval, rho: CircleAction, N: int = 64,
                   allow_coarse: bool = False) -> MetricEval:
    """Haar average ``(1/N) sum_k rho_{theta_k}^* g1`` with ``theta_k = 2 pi k / N``.

    ``N < 8`` is rejected unless ``allow_coarse`` is set (used to demonstrate
    an under-resolved average).
    """
    if N < 1 or (N < 8 and not allow_coarse):
        raise ContractError(f"average_metric needs N >= 8 nodes, got {N}")
    thetas = 2 * np.pi * np.arange(N) / N

    def func(p):
        p = np.asarray(p, dtype=float)
        acc = np.zeros(p.shape[:-1] + (g1.dim, g1.dim))
        for th in thetas:
            J = rho.jacobian(th, p)
            acc += np.einsum("...ki,...kl,...lj->...ij", J, g1(rho(th, p)), J)
        G = acc / N
        lam = np.linalg.eigvalsh(G)[..., 0]
        if np.any(lam <= g1.eps_pd):
            raise ContractError(f"averaged metric lost positive definiteness (min eigenvalue {lam.min():.3e})")
        return G

    return MetricEval(g1.dim, func, eps_pd=g1.eps_pd, name=f"avg({g1.name})")


def killing_residual(X: VectorField, g: MetricEval, samples, h: float = DEFAULT_H, frame=None) -> float:
    """``max |(L_X g)(e_i, e_j)|`` over samples and coordinate (or frame) pairs."""
    samples = np.asarray(samples, dtype=float)
    L = lie_derivative_metric(X, g, samples, h)
    B = _frame_or_identity(frame, samples, g.dim)
    L = np.einsum("...ka,...kl,...lb->...ab", B, L, B)
    return float(np.abs(L).max())


def normalize_metric(g2: MetricEval, X: VectorField) -> MetricEval:
    """The conformal metric ``g2 / g2(X, X)``, for which ``X`` has unit length."""

    def func(p):
        G = g2(p)
        Xv = X(p)
        nx = np.einsum("...i,...ij,...j->...", Xv, G, Xv)
        if np.any(nx <= 0):
            raise ContractError("g2(X, X) vanishes; X must be non-vanishing")
        return G / nx[..., None, None]

    return MetricEval(g2.dim, func, eps_pd=g2.eps_pd, name=f"normalized({g2.name})")


def dual_one_form(g: MetricEval, X: VectorField) -> KForm:
    """``alpha = g(X, .)``."""
    return KForm(g.dim, 1, lambda p: np.einsum("...ij,...j->...i", g(p), X(p)), name="alpha")


@dataclass(frozen=True)
class GeodesibilityReport:
    min_alpha_x: float
    max_alpha_x: float
    max_iota_dalpha: float
    tol: float

    @property
    def passed(self):
        return self.min_alpha_x > 0 and self.max_iota_dalpha < self.tol


def geodesibility_check(alpha: KForm, X: VectorField, samples, tol: float = 1e-6,
                        h: float = DEFAULT_H, frame=None) -> GeodesibilityReport:
    """Report ``alpha(X)`` (unnormalised) and ``max |i_X d alpha|`` on tangent vectors."""
    samples = np.asarray(samples, dtype=float)
    ax = eval_form(alpha, samples, X(samples))
    c = interior_product(X, exterior_derivative(alpha, h))(samples)
    B = _frame_or_identity(frame, samples, alpha.dim)
    c = np.einsum("...i,...ia->...a", c, B)
    return GeodesibilityReport(float(ax.min()), float(ax.max()), float(np.abs(c).max()), tol)


def _complement(B):
    # orthonormal basis of the orthogonal complement of the columns of B
    n, m = B.shape[-2:]
    U = np.linalg.svd(B, full_matrices=True)[0]
    return U[..., :, m:]


def build_euler_metric(alpha: KForm, X: VectorField, mu: KForm, base_g: MetricEval,
                       frame=None) -> MetricEval:
    """Metric with ``g(X, .) = alpha``, ``X`` orthogonal to ``ker alpha`` and volume ``mu``.

    On ``ker alpha`` the metric is ``c * base_g`` where the positive factor
    ``c`` solves ``alpha(X) c^(m-1) det(base_g|ker) / det(P)^2 = mu^2`` in
    the basis ``P = (X, ker alpha)``.
    """
    n = alpha.dim

    def func(p):
        p = np.asarray(p, dtype=float)
        B = _frame_or_identity(frame, p, n)
        m = B.shape[-1]
        Xv = X(p)
        a = alpha(p)
        ax = np.einsum("...i,...i->...", a, Xv)
        if np.any(ax <= 0):
            raise ContractError("alpha(X) must be positive")
        xm = np.einsum("...ai,...i->...a", np.linalg.pinv(B), Xv)
        am = np.einsum("...i,...ia->...a", a, B)
        Gb = np.einsum("...ia,...ij,...jb->...ab", B, base_g(p), B)
        mum = eval_form(mu, p, *(B[..., :, i] for i in range(m)))
        K = np.swapaxes(np.linalg.svd(am[..., None, :])[2][..., 1:, :], -1, -2)
        GK = np.einsum("...ia,...ij,...jb->...ab", K, Gb, K)
        P = np.concatenate([xm[..., None], K], axis=-1)
        detGK = np.linalg.det(GK)
        detP = np.linalg.det(P)
        if np.any(detGK <= 0) or np.any(np.abs(detP) < 1e-14) or np.any(mum == 0):
            raise ContractError("degenerate restriction of the base metric or vanishing volume form")
        c = (mum ** 2 * detP ** 2 / (ax * detGK)) ** (1.0 / (m - 1))
        Gbasis = np.zeros(p.shape[:-1] + (m, m))
        Gbasis[..., 0, 0] = ax
        Gbasis[..., 1:, 1:] = c[..., None, None] * GK
        Pinv = np.linalg.inv(P)
        Gm = np.einsum("...ka,...kl,...lb->...ab", Pinv, Gbasis, Pinv)
        if m == n:
            Bi = np.linalg.inv(B)
            return np.einsum("...ai,...ab,...bj->...ij", Bi, Gm, Bi)
        Q = np.concatenate([B, _complement(B)], axis=-1)
        Qi = np.linalg.inv(Q)
        full = np.broadcast_to(np.eye(n), p.shape[:-1] + (n, n)).copy()
        full[..., :m, :m] = Gm
        return np.einsum("...ai,...ab,...bj->...ij", Qi, full, Qi)

    return MetricEval(n, func, name="euler")


def _top_interior_matrix(m):
    # column i holds the coefficients of i_{e_i}(e^1 ^ ... ^ e^m)
    top = constant_form(m, m, {tuple(range(m)): 1.0})
    cols = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        cols.append(interior_product(VectorField(m, lambda p, e=e: np.broadcast_to(e, np.shape(p))), top)(np.zeros(m)))
    return np.stack(cols, axis=-1)


def curl_from_form(alpha: KForm, mu: KForm, frame=None, h: float = DEFAULT_H) -> VectorField:
    """The field ``w`` with ``i_w mu = (d alpha)^n`` on a ``2n+1``-dimensional manifold."""
    n_amb = alpha.dim
    m = n_amb if frame is None else None

    def func(p):
        p = np.asarray(p, dtype=float)
        B = _frame_or_identity(frame, p, n_amb)
        mm = B.shape[-1]
        if mm % 2 == 0 or mm < 3:
            raise UnsupportedOperation(f"curl needs odd dimension >= 3, got {mm}")
        power = wedge_power(exterior_derivative(alpha, h), (mm - 1) // 2)
        cols = [B[..., :, i] for i in range(mm)]
        mum = eval_form(mu, p, *cols)
        if np.any(np.abs(mum) < 1e-14):
            raise ContractError("volume form vanishes; curl equation is singular")
        # (m-1)-subsets of the frame in lexicographic order: drop index m-1, m-2, ..., 0
        rhs = np.stack([eval_form(power, p, *(cols[j] for j in range(mm) if j != drop))
                        for drop in reversed(range(mm))], axis=-1)
        A = mum[..., None, None] * _top_interior_matrix(mm)
        wm = np.linalg.solve(A, rhs[..., None])[..., 0]
        return np.einsum("...ia,...a->...i", B, wm)

    if m is not None and (m % 2 == 0 or m < 3):
        raise UnsupportedOperation(f"curl needs odd dimension >= 3, got {m}")
    return VectorField(n_amb, func, name="curl")


def curl(X: VectorField, g: MetricEval, mu: KForm, frame=None, h: float = DEFAULT_H) -> VectorField:
    """Curl of ``X`` for the metric ``g``: ``i_w mu = (d alpha)^n`` with ``alpha = g(X, .)``."""
    return curl_from_form(dual_one_form(g, X), mu, frame, h)


def beltrami_residual(X: VectorField, w: VectorField, g: MetricEval, samples) -> float:
    """``max |w - (g(w, X) / g(X, X)) X|_g``; zero iff ``w`` is parallel to ``X``."""
    samples = np.asarray(samples, dtype=float)
    Xv, wv = X(samples), w(samples)
    coef = g.inner(samples, wv, Xv) / g.inner(samples, Xv, Xv)
    r = wv - coef[..., None] * Xv
    return float(g.norm(samples, r).max())
