"""
Chart-level exterior calculus.

Everything here is evaluated pointwise on batches of chart points: a point
array has shape ``(..., n)`` and every evaluator broadcasts over the leading
axes.  A k-form stores one coefficient per strictly increasing multi-index
``I = (i_1 < ... < i_k)``; multi-indices are ordered lexicographically, which
is the order produced by :func:`itertools.combinations`.

The determinant convention is used throughout, i.e. ``(dx ^ dy)(e1, e2) = 1``
and no ``1/k!`` factors appear in the wedge product.

Differentiation of coefficient functions uses analytic partials when a form
carries them, and fourth order central differences otherwise.  The algebraic
operations (wedge, d, interior product) act exactly on the coefficients, and
propagate analytic partials whenever both operands provide them.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, UnsupportedOperation

__all__ = [
    "DEFAULT_H",
    "multi_indices",
    "index_of",
    "fd_partials",
    "ScalarField",
    "VectorField",
    "KForm",
    "Diffeo",
    "MetricEval",
    "constant_form",
    "eval_form",
    "wedge",
    "wedge_power",
    "exterior_derivative",
    "interior_product",
    "pullback",
    "pushforward",
    "lie_derivative_form",
    "lie_derivative_metric",
]

DEFAULT_H = 1e-4


# ---------------------------------------------------------------------------
# multi-index bookkeeping

@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple:
    """Strictly increasing k-subsets of range(n) in lexicographic order."""
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def _index_map(n, k):
    return {I: i for i, I in enumerate(multi_indices(n, k))}


def index_of(n: int, I) -> int:
    """Position of the increasing multi-index ``I`` in the coefficient vector."""
    I = tuple(I)
    return _index_map(n, len(I))[I]


def _perm_sign(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _wedge_table(n, p, q):
    rows_k, rows_i, rows_j, signs = [], [], [], []
    for kk, K in enumerate(multi_indices(n, p + q)):
        for I in itertools.combinations(K, p):
            J = tuple(x for x in K if x not in I)
            rows_k.append(kk)
            rows_i.append(index_of(n, I))
            rows_j.append(index_of(n, J))
            signs.append(_perm_sign(I + J))
    S = np.zeros((len(rows_k), comb(n, p + q)))
    S[np.arange(len(rows_k)), rows_k] = signs
    return np.array(rows_i, dtype=int), np.array(rows_j, dtype=int), S


@lru_cache(maxsize=None)
def _d_table(n, k):
    rows_j, rows_i, coords, signs = [], [], [], []
    for jj, J in enumerate(multi_indices(n, k + 1)):
        for r, c in enumerate(J):
            rows_j.append(jj)
            rows_i.append(index_of(n, J[:r] + J[r + 1:]))
            coords.append(c)
            signs.append((-1) ** r)
    S = np.zeros((len(rows_j), comb(n, k + 1)))
    S[np.arange(len(rows_j)), rows_j] = signs
    return np.array(rows_i, dtype=int), np.array(coords, dtype=int), S


@lru_cache(maxsize=None)
def _interior_table(n, k):
    # (i_X w)_J = sum_{i not in J} (-1)^{pos(i)} X_i w_{sorted(i u J)}
    rows_j, rows_i, comps, signs = [], [], [], []
    for jj, J in enumerate(multi_indices(n, k - 1)):
        for c in range(n):
            if c in J:
                continue
            full = tuple(sorted(J + (c,)))
            rows_j.append(jj)
            rows_i.append(index_of(n, full))
            comps.append(c)
            signs.append((-1) ** full.index(c))
    S = np.zeros((len(rows_j), comb(n, k - 1)))
    S[np.arange(len(rows_j)), rows_j] = signs
    return np.array(rows_i, dtype=int), np.array(comps, dtype=int), S


def fd_partials(f, p, h=DEFAULT_H):
    """Fourth order central differences of ``f`` along each chart coordinate.

    ``f`` maps ``(..., n)`` to ``(..., *shape)``; the result has shape
    ``(..., *shape, n)`` with the derivative direction last.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[-1]
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((-f(p + 2 * e) + 8 * f(p + e) - 8 * f(p - e) + f(p - 2 * e)) / (12 * h))
    return np.stack(cols, axis=-1)


def _points(p, n):
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (n,):
        raise ContractError(f"expected points with {n} coordinates, got shape {p.shape}")
    return p


# ---------------------------------------------------------------------------
# fields and forms

@dataclass(frozen=True)
class ScalarField:
    """A function on the chart, optionally with its analytic gradient."""

    dim: int
    func: Callable
    grad: Optional[Callable] = None
    name: str = ""

    def __call__(self, p):
        return np.asarray(self.func(_points(p, self.dim)), dtype=float)

    def gradient(self, p, h=DEFAULT_H):
        p = _points(p, self.dim)
        if self.grad is not None:
            return np.asarray(self.grad(p), dtype=float)
        return fd_partials(self.func, p, h)

    def as_form(self) -> "KForm":
        grad = None
        if self.grad is not None:
            grad = lambda p: np.asarray(self.grad(p), dtype=float)[..., None, :]
        return KForm(self.dim, 0, lambda p: np.asarray(self.func(p), dtype=float)[..., None], grad,
                     name=self.name)


@dataclass(frozen=True)
class VectorField:
    """A vector field on an n-dimensional chart.

    ``func`` maps ``(..., n)`` points to ``(..., n)`` components. ``jac``, if
    given, returns ``J[..., i, j] = d X_i / d x_j``.
    """

    dim: int
    func: Callable
    jac: Optional[Callable] = None
    name: str = ""

    def __call__(self, p):
        p = _points(p, self.dim)
        out = np.asarray(self.func(p), dtype=float)
        if out.shape[-1:] != (self.dim,):
            raise ContractError(f"field {self.name!r} returned shape {out.shape}")
        return out

    def jacobian(self, p, h=DEFAULT_H):
        p = _points(p, self.dim)
        if self.jac is not None:
            return np.asarray(self.jac(p), dtype=float)
        return fd_partials(self.func, p, h)

    def __rmul__(self, c):
        c = float(c)
        jac = None if self.jac is None else (lambda p: c * np.asarray(self.jac(p)))
        return VectorField(self.dim, lambda p: c * np.asarray(self.func(p)), jac, self.name)

    def __add__(self, other):
        if self.dim != other.dim:
            raise ContractError("fields live on different charts")
        jac = None
        if self.jac is not None and other.jac is not None:
            jac = lambda p: np.asarray(self.jac(p)) + np.asarray(other.jac(p))
        return VectorField(self.dim, lambda p: np.asarray(self.func(p)) + np.asarray(other.func(p)), jac)


@dataclass(frozen=True)
class KForm:
    """A differential k-form given by its coefficient functions.

    ``func`` maps ``(..., n)`` to ``(..., binomial(n, k))``; ``partials_func``
    (optional) returns ``(..., binomial(n, k), n)`` with the derivative
    direction last.
    """

    dim: int
    degree: int
    func: Callable
    partials_func: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if not 0 <= self.degree <= self.dim:
            raise ContractError(f"degree {self.degree} outside [0, {self.dim}]")

    @property
    def size(self) -> int:
        return comb(self.dim, self.degree)

    @property
    def has_partials(self) -> bool:
        return self.partials_func is not None

    def __call__(self, p):
        p = _points(p, self.dim)
        out = np.asarray(self.func(p), dtype=float)
        if out.shape[-1:] != (self.size,):
            raise ContractError(f"form {self.name!r} returned shape {out.shape}, expected (..., {self.size})")
        return np.broadcast_to(out, p.shape[:-1] + (self.size,))

    def partials(self, p, h=DEFAULT_H):
        p = _points(p, self.dim)
        if self.partials_func is not None:
            out = np.asarray(self.partials_func(p), dtype=float)
            return np.broadcast_to(out, p.shape[:-1] + (self.size, self.dim))
        return fd_partials(self.__call__, p, h)

    def _check_same(self, other):
        if (self.dim, self.degree) != (other.dim, other.degree):
            raise ContractError("forms differ in dimension or degree")

    def __add__(self, other):
        self._check_same(other)
        partials = None
        if self.has_partials and other.has_partials:
            partials = lambda p: self.partials(p) + other.partials(p)
        return KForm(self.dim, self.degree, lambda p: self(p) + other(p), partials)

    def __neg__(self):
        return (-1.0) * self

    def __sub__(self, other):
        return self + (-other)

    def __rmul__(self, c):
        c = float(c)
        partials = None if not self.has_partials else (lambda p: c * self.partials(p))
        return KForm(self.dim, self.degree, lambda p: c * self(p), partials, self.name)

    def scaled(self, f: ScalarField) -> "KForm":
        """Pointwise product with a scalar field."""
        partials = None
        if self.has_partials and f.grad is not None:
            def partials(p):
                fv = f(p)[..., None, None]
                return f.gradient(p)[..., None, :] * self(p)[..., :, None] + fv * self.partials(p)
        return KForm(self.dim, self.degree, lambda p: f(p)[..., None] * self(p), partials)


def constant_form(n: int, k: int, terms: dict, name: str = "") -> KForm:
    """Form with constant coefficients, e.g. ``constant_form(5, 2, {(0, 1): 1.0})`` is dx^dy."""
    c = np.zeros(comb(n, k))
    for I, v in terms.items():
        c[index_of(n, I)] = v
    return KForm(n, k, lambda p: np.broadcast_to(c, np.shape(p)[:-1] + c.shape),
                 lambda p: np.zeros(np.shape(p)[:-1] + (c.size, n)), name)


@dataclass(frozen=True)
class Diffeo:
    """A chart diffeomorphism with its Jacobian and, optionally, its inverse."""

    dim: int
    func: Callable
    jac: Callable
    inverse: Optional["Diffeo"] = None
    eps_jac: float = 1e-12
    name: str = ""

    def __call__(self, p):
        return np.asarray(self.func(_points(p, self.dim)), dtype=float)

    def jacobian(self, p):
        p = _points(p, self.dim)
        J = np.asarray(self.jac(p), dtype=float)
        J = np.broadcast_to(J, p.shape[:-1] + (self.dim, self.dim))
        if np.any(np.abs(np.linalg.det(J)) < self.eps_jac):
            raise ContractError(f"Jacobian of {self.name or 'map'} is singular at an evaluated point")
        return J

    @classmethod
    def identity(cls, n):
        eye = np.eye(n)
        ident = cls(n, lambda p: np.array(p, dtype=float), lambda p: eye, name="identity")
        return cls(n, ident.func, ident.jac, inverse=ident, name="identity")


@dataclass(frozen=True)
class MetricEval:
    """A Riemannian metric on a chart: ``func`` returns ``(..., n, n)``.

    ``partials_func`` (optional) returns ``(..., n, n, n)`` with the
    derivative direction last.
    """

    dim: int
    func: Callable
    partials_func: Optional[Callable] = None
    eps_pd: float = 1e-10
    name: str = ""

    def __call__(self, p):
        p = _points(p, self.dim)
        G = np.asarray(self.func(p), dtype=float)
        return np.broadcast_to(G, p.shape[:-1] + (self.dim, self.dim))

    def partials(self, p, h=DEFAULT_H):
        p = _points(p, self.dim)
        if self.partials_func is not None:
            return np.asarray(self.partials_func(p), dtype=float)
        return fd_partials(self.__call__, p, h)

    def inner(self, p, u, v):
        return np.einsum("...i,...ij,...j->...", u, self(p), v)

    def norm(self, p, u):
        return np.sqrt(self.inner(p, u, u))

    def min_eigenvalue(self, p):
        G = self(p)
        return np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G, -1, -2)))[..., 0]

    def check_positive(self, p):
        lam = self.min_eigenvalue(p)
        if np.any(lam <= self.eps_pd):
            raise ContractError(f"metric {self.name!r} not positive definite (min eigenvalue {lam.min():.3e})")
        return lam


# ---------------------------------------------------------------------------
# algebra

def _canonical_det(V):
    """Determinant of the ``(..., k, k)`` stack, exactly antisymmetric in columns.

    Columns are sorted by a fixed key before the LU factorisation and the
    permutation sign is restored afterwards, so permuting the input columns
    only flips the sign bit of the result.
    """
    k = V.shape[-1]
    if k == 1:
        return V[..., 0, 0]
    if k == 2:
        return V[..., 0, 0] * V[..., 1, 1] - V[..., 0, 1] * V[..., 1, 0]
    weights = np.sqrt(np.arange(2, k + 2, dtype=float)) * np.pi ** np.arange(k)
    key = np.einsum("...ij,i->...j", V, weights)
    order = np.argsort(key, axis=-1, kind="stable")
    sign = np.ones(order.shape[:-1])
    for i in range(k):
        for j in range(i + 1, k):
            sign = np.where(order[..., i] > order[..., j], -sign, sign)
    Vs = np.take_along_axis(V, order[..., None, :], axis=-1)
    return sign * np.linalg.det(Vs)


def eval_form(form: KForm, p, *vectors):
    """Evaluate ``form`` at ``p`` on ``degree`` tangent vectors.

    Returns ``sum_I c_I(p) det(V[I, :])`` where the columns of ``V`` are the
    vectors.
    """
    if len(vectors) != form.degree:
        raise ContractError(f"{form.degree}-form evaluated on {len(vectors)} vectors")
    c = form(p)
    if form.degree == 0:
        return c[..., 0]
    vs = [np.asarray(v, dtype=float) for v in vectors]
    for v in vs:
        if v.shape[-1:] != (form.dim,):
            raise ContractError(f"vector of shape {v.shape} on a {form.dim}-dimensional chart")
    V = np.stack(np.broadcast_arrays(*vs), axis=-1)
    idx = np.array(multi_indices(form.dim, form.degree))
    dets = _canonical_det(V[..., idx, :])
    return np.sum(c * dets, axis=-1)


def wedge(a: KForm, b: KForm) -> KForm:
    """Exterior product ``a ^ b``; partials propagate when both factors carry them."""
    if a.dim != b.dim:
        raise ContractError("wedge of forms on different charts")
    n, p, q = a.dim, a.degree, b.degree
    if p + q > n:
        raise ContractError(f"wedge degree {p + q} exceeds dimension {n}")
    ii, jj, S = _wedge_table(n, p, q)

    def func(x):
        return (a(x)[..., ii] * b(x)[..., jj]) @ S

    partials = None
    if a.has_partials and b.has_partials:
        def partials(x):
            da, db = a.partials(x), b.partials(x)
            t = da[..., ii, :] * b(x)[..., jj, None] + a(x)[..., ii, None] * db[..., jj, :]
            return np.einsum("...tn,tk->...kn", t, S)

    return KForm(n, p + q, func, partials)


def wedge_power(w: KForm, k: int) -> KForm:
    if k < 1:
        raise ContractError("wedge power needs k >= 1")
    out = w
    for _ in range(k - 1):
        out = wedge(out, w)
    return out


def exterior_derivative(w, h: float = DEFAULT_H) -> KForm:
    """Exterior derivative; coefficient partials are analytic if available, else finite differences."""
    if isinstance(w, ScalarField):
        w = w.as_form()
    n, k = w.dim, w.degree
    if k >= n:
        raise ContractError(f"d of a {k}-form on an {n}-dimensional chart")
    ii, cc, S = _d_table(n, k)

    def func(x):
        P = w.partials(x, h)
        return P[..., ii, cc] @ S

    return KForm(n, k + 1, func, name=f"d{w.name}" if w.name else "")


def interior_product(X: VectorField, w: KForm) -> KForm:
    """Contraction ``i_X w`` in the first slot."""
    if w.degree < 1:
        raise ContractError("interior product of a 0-form")
    if X.dim != w.dim:
        raise ContractError("field and form on different charts")
    ii, cc, S = _interior_table(w.dim, w.degree)

    def func(x):
        return (X(x)[..., cc] * w(x)[..., ii]) @ S

    partials = None
    if X.jac is not None and w.has_partials:
        def partials(x):
            Xv, J = X(x), X.jacobian(x)
            t = J[..., cc, :] * w(x)[..., ii, None] + Xv[..., cc, None] * w.partials(x)[..., ii, :]
            return np.einsum("...tn,tk->...kn", t, S)

    return KForm(w.dim, w.degree - 1, func, partials)


def pullback(phi: Diffeo, w: KForm) -> KForm:
    """``(phi^* w)_I(p) = sum_J w_J(phi(p)) det(Dphi(p)[J, I])``."""
    if phi.dim != w.dim:
        raise ContractError("map and form on different charts")
    n, k = w.dim, w.degree
    if k == 0:
        return KForm(n, 0, lambda x: w(phi(x)))
    idx = np.array(multi_indices(n, k))

    def func(x):
        D = phi.jacobian(x)
        sub = D[..., idx[:, None, :, None], idx[None, :, None, :]]
        minors = np.linalg.det(sub)
        return np.einsum("...j,...ji->...i", w(phi(x)), minors)

    return KForm(n, k, func)


def pushforward(phi: Diffeo, X: VectorField) -> VectorField:
    """``(phi_* X)(q) = Dphi(phi^-1 q) X(phi^-1 q)``; needs ``phi.inverse``."""
    if phi.inverse is None:
        raise UnsupportedOperation(f"pushforward along {phi.name or 'map'} needs its inverse")
    inv = phi.inverse

    def func(q):
        p = inv(q)
        return np.einsum("...ij,...j->...i", phi.jacobian(p), X(p))

    return VectorField(X.dim, func)


def lie_derivative_form(X: VectorField, w: KForm, h: float = DEFAULT_H) -> KForm:
    """Lie derivative by Cartan's formula ``L_X w = i_X dw + d i_X w``."""
    if X.dim != w.dim:
        raise ContractError("field and form on different charts")
    if w.degree == 0:
        return interior_product(X, exterior_derivative(w, h))
    second = exterior_derivative(interior_product(X, w), h)
    if w.degree == w.dim:
        return second
    return interior_product(X, exterior_derivative(w, h)) + second


def lie_derivative_metric(X: VectorField, g: MetricEval, p, h: float = DEFAULT_H):
    """Components ``(L_X g)(e_i, e_j)`` on the coordinate fields at ``p``.

    ``X(g_ij) - g([X, e_i], e_j) - g(e_i, [X, e_j])`` with
    ``[X, e_i] = -dX/dx_i``.
    """
    if X.dim != g.dim:
        raise ContractError("field and metric on different charts")
    p = _points(p, g.dim)
    G = g(p)
    dG = g.partials(p, h)
    J = X.jacobian(p, h)
    return (np.einsum("...ijk,...k->...ij", dG, X(p))
            + np.einsum("...ki,...kj->...ij", J, G)
            + np.einsum("...ik,...kj->...ij", G, J))
