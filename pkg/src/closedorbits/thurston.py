"""
The Thurston flow on M = H/Lambda x S^1 x S^1.

Chart coordinates are ``(x, y, z, t, u)``: ``(x, y, z)`` are the Heisenberg
parameters of the matrix ``[[1, x, z], [0, 1, y], [0, 0, 1]]`` and ``t, u``
are angles with period 2*pi.  The integer lattice acts on the left,
``(x, y, z) -> (x + a, y + b, z + a*y + c)``.

All lengths are measured in the frame metric, the metric for which
``{d/dx, d/dy + x d/dz, d/dz, d/dt, d/du}`` is orthonormal; it is invariant
under the lattice.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .forms import Diffeo, KForm, MetricEval, VectorField, constant_form, pullback, pushforward
from .rng import SplitMix64

TWO_PI = 2.0 * np.pi
DIM = 5
X_, Y_, Z_, T_, U_ = range(5)


@dataclass(frozen=True)
class QuotientConvention:
    t_period: float = TWO_PI
    u_period: float = TWO_PI
    reduction_order: str = "bac"


CONVENTION = QuotientConvention()


@dataclass(frozen=True)
class LatticeElement:
    """Integer Heisenberg matrix ``[[1, a, c], [0, 1, b], [0, 0, 1]]``."""

    a: int = 0
    b: int = 0
    c: int = 0

    def __mul__(self, other: "LatticeElement") -> "LatticeElement":
        # matrix product self @ other, i.e. act(self * other) = act(self) o act(other)
        return LatticeElement(self.a + other.a, self.b + other.b,
                              self.c + other.c + self.a * other.b)

    def inverse(self) -> "LatticeElement":
        return LatticeElement(-self.a, -self.b, self.a * self.b - self.c)

    def as_array(self):
        return np.array([self.a, self.b, self.c])

    def diffeo(self) -> Diffeo:
        return _lattice_diffeo(self.a, self.b, self.c)


def _act_xyz(a, b, c, p):
    out = np.array(p, dtype=float, copy=True)
    out[..., X_] = p[..., X_] + a
    out[..., Y_] = p[..., Y_] + b
    out[..., Z_] = p[..., Z_] + a * p[..., Y_] + c
    return out


def _lattice_diffeo(a, b, c, with_inverse=True):
    J = np.eye(DIM)
    J[Z_, Y_] = a
    inverse = None
    if with_inverse:
        g = LatticeElement(a, b, c).inverse()
        inverse = _lattice_diffeo(g.a, g.b, g.c, with_inverse=False)
    return Diffeo(DIM, lambda p: _act_xyz(a, b, c, p), lambda p: J, inverse=inverse,
                  name=f"phi_({a},{b},{c})")


def lattice_act(gamma, p):
    """Apply a lattice element (a ``LatticeElement`` or an ``(..., 3)`` int array)."""
    p = np.asarray(p, dtype=float)
    if isinstance(gamma, LatticeElement):
        return _act_xyz(gamma.a, gamma.b, gamma.c, p)
    g = np.asarray(gamma)
    return _act_xyz(g[..., 0], g[..., 1], g[..., 2], p)


def _reduce_unit(v):
    k = -np.floor(v)
    r = v + k
    over = r >= 1.0
    return np.where(over, r - 1.0, r), np.where(over, k - 1, k)


def _reduce_angle(v, period=TWO_PI):
    k = -np.floor(v / period)
    r = v + k * period
    r, k = np.where(r >= period, r - period, r), np.where(r >= period, k - 1, k)
    r, k = np.where(r < 0.0, r + period, r), np.where(r < 0.0, k + 1, k)
    return r, k


def canonicalize(p):
    """Fundamental-domain representative of ``p``.

    Returns ``(point, gamma, wraps)`` with ``point = lattice_act(gamma, p)``
    shifted by ``2*pi*wraps`` in ``(t, u)``; ``y``, then ``x``, then ``z`` is
    reduced into ``[0, 1)`` (the z-shift of an x-step uses the reduced y).
    For a single point ``gamma`` is a :class:`LatticeElement` and ``wraps``
    an int pair; for batches both are integer arrays.
    """
    p = np.asarray(p, dtype=float)
    out = np.array(p, copy=True)
    out[..., Y_], b = _reduce_unit(p[..., Y_])
    out[..., X_], a = _reduce_unit(p[..., X_])
    z = p[..., Z_] + a * out[..., Y_]
    out[..., Z_], c = _reduce_unit(z)
    out[..., T_], kt = _reduce_angle(p[..., T_], CONVENTION.t_period)
    out[..., U_], ku = _reduce_angle(p[..., U_], CONVENTION.u_period)
    # (0,0,c) * (a,0,0) * (0,b,0) = (a, b, c + a*b)
    gamma = np.stack([a, b, c + a * b], axis=-1).astype(np.int64)
    wraps = np.stack([kt, ku], axis=-1).astype(np.int64)
    if p.ndim == 1:
        return out, LatticeElement(*(int(v) for v in gamma)), (int(wraps[0]), int(wraps[1]))
    return out, gamma, wraps


def frame_metric_matrix(p):
    p = np.asarray(p, dtype=float)
    G = np.broadcast_to(np.eye(DIM), p.shape[:-1] + (DIM, DIM)).copy()
    x = p[..., X_]
    G[..., Y_, Y_] = 1.0 + x * x
    G[..., Y_, Z_] = -x
    G[..., Z_, Y_] = -x
    return G


def _frame_metric_partials(p):
    p = np.asarray(p, dtype=float)
    dG = np.zeros(p.shape[:-1] + (DIM, DIM, DIM))
    dG[..., Y_, Y_, X_] = 2.0 * p[..., X_]
    dG[..., Y_, Z_, X_] = -1.0
    dG[..., Z_, Y_, X_] = -1.0
    return dG


def frame_metric() -> MetricEval:
    """``dx^2 + dy^2 + (dz - x dy)^2 + dt^2 + du^2``."""
    return MetricEval(DIM, frame_metric_matrix, _frame_metric_partials, name="frame")


def frame_distance(p, q):
    """Metric length of ``q - p`` with the frame metric frozen at the midpoint."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = q - p
    G = frame_metric_matrix(0.5 * (p + q))
    return np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", d, G, d), 0.0))


# neighbour images searched by quotient_distance; the c range is widened to
# +-2 because a = +-1 moves z by up to one unit before the c-shift
_NEIGHBOURS = np.array([(a, b, c, kt, ku)
                        for a, b, c in itertools.product((-1, 0, 1), (-1, 0, 1), (-2, -1, 0, 1, 2))
                        for kt, ku in itertools.product((-1, 0, 1), repeat=2)], dtype=float)


def _neighbour_images(q):
    """All searched images of canonical points ``q``: shape ``(..., K, 5)``."""
    N = _NEIGHBOURS
    q = q[..., None, :]
    out = np.broadcast_to(q, q.shape[:-2] + (len(N), DIM)).copy()
    out[..., X_] = q[..., X_] + N[:, 0]
    out[..., Y_] = q[..., Y_] + N[:, 1]
    out[..., Z_] = q[..., Z_] + N[:, 0] * q[..., Y_] + N[:, 2]
    out[..., T_] = q[..., T_] + TWO_PI * N[:, 3]
    out[..., U_] = q[..., U_] + TWO_PI * N[:, 4]
    return out


def quotient_distance(p, q):
    """Frame-metric distance between the quotient classes of ``p`` and ``q``.

    Both points are canonicalised, then the minimum is taken over nearby
    lattice images and torus wraps of ``q``.
    """
    cp = canonicalize(np.asarray(p, dtype=float))[0]
    cq = canonicalize(np.asarray(q, dtype=float))[0]
    imgs = _neighbour_images(cq)
    return frame_distance(cp[..., None, :], imgs).min(axis=-1)


def torus_distance(p, q):
    """Distance of the ``(t, u)`` parts on the flat torus; a lower bound for quotient_distance."""
    d = np.asarray(p, dtype=float)[..., T_:] - np.asarray(q, dtype=float)[..., T_:]
    d = np.abs(d - TWO_PI * np.round(d / TWO_PI))
    return np.sqrt(np.sum(d * d, axis=-1))


def nearest_lift(q_cover, p):
    """Representative of the quotient class of ``p`` nearest to ``q_cover`` in the cover."""
    q_cover = np.asarray(q_cover, dtype=float)
    cq, gq, wq = canonicalize(np.atleast_2d(q_cover))
    cp = canonicalize(np.atleast_2d(np.asarray(p, dtype=float)))[0]
    imgs = _neighbour_images(cp)
    best = np.argmin(frame_distance(cq[:, None, :], imgs), axis=-1)
    target = imgs[np.arange(len(best)), best]
    target[:, T_:] -= TWO_PI * wq
    lifted = lattice_act(np.stack([-gq[:, 0], -gq[:, 1], gq[:, 0] * gq[:, 1] - gq[:, 2]], -1), target)
    return lifted.reshape(q_cover.shape)


# ---------------------------------------------------------------------------
# fields and forms

def _x_components(p):
    x, t, u = p[..., X_], p[..., T_], p[..., U_]
    s2 = np.sin(2 * u)
    ct, st = np.cos(t), np.sin(t)
    return np.stack([s2 * ct, s2 * st, s2 * st * x - np.cos(u) ** 2,
                     2 * np.sin(u) ** 2, np.zeros_like(u)], axis=-1)


def _x_jacobian(p):
    x, t, u = p[..., X_], p[..., T_], p[..., U_]
    s2, c2 = np.sin(2 * u), np.cos(2 * u)
    ct, st = np.cos(t), np.sin(t)
    J = np.zeros(p.shape[:-1] + (DIM, DIM))
    J[..., X_, T_] = -s2 * st
    J[..., X_, U_] = 2 * c2 * ct
    J[..., Y_, T_] = s2 * ct
    J[..., Y_, U_] = 2 * c2 * st
    J[..., Z_, X_] = s2 * st
    J[..., Z_, T_] = s2 * ct * x
    J[..., Z_, U_] = 2 * c2 * st * x + s2
    J[..., T_, U_] = 2 * s2
    return J


def field_X() -> VectorField:
    """``sin(2u) V1 + 2 sin^2(u) d/dt - cos^2(u) d/dz`` with
    ``V1 = cos t d/dx + sin t (d/dy + x d/dz)``."""
    return VectorField(DIM, _x_components, _x_jacobian, name="X")


def frame_V1() -> VectorField:
    def f(p):
        x, t = p[..., X_], p[..., T_]
        z = np.zeros_like(x)
        return np.stack([np.cos(t), np.sin(t), x * np.sin(t), z, z], axis=-1)
    return VectorField(DIM, f, name="V1")


def frame_V2() -> VectorField:
    def f(p):
        x, t = p[..., X_], p[..., T_]
        z = np.zeros_like(x)
        return np.stack([-np.sin(t), np.cos(t), x * np.cos(t), z, z], axis=-1)
    return VectorField(DIM, f, name="V2")


def distance_to_bad_set(u):
    """Distance of ``u`` to the set ``u = 0 mod pi`` where W is undefined."""
    r = np.mod(np.asarray(u, dtype=float), np.pi)
    return np.minimum(r, np.pi - r)


def field_W(eps_u: float = 1e-3) -> VectorField:
    """``X / (2 sin^2 u)``, raising :class:`DomainError` within ``eps_u`` of ``u = 0 mod pi``."""

    def check(p):
        if np.any(distance_to_bad_set(p[..., U_]) <= eps_u):
            raise DomainError(f"W is undefined on u = 0 mod pi; point within the band of width {eps_u}")

    def f(p):
        check(p)
        return _x_components(p) / (2 * np.sin(p[..., U_]) ** 2)[..., None]

    def jac(p):
        check(p)
        u = p[..., U_]
        s = 1.0 / (2 * np.sin(u) ** 2)
        ds = -np.cos(u) / np.sin(u) ** 3
        J = s[..., None, None] * _x_jacobian(p)
        J[..., :, U_] += _x_components(p) * ds[..., None]
        return J

    return VectorField(DIM, f, jac, name="W")


def w_flow(theta, p):
    """Closed-form time-``theta`` flow of W (period 2*pi) with ``k = cot u``."""
    p = np.asarray(p, dtype=float)
    theta = np.asarray(theta, dtype=float)
    x0, y0, z0, t0, u = (p[..., i] for i in range(DIM))
    k = np.cos(u) / np.sin(u)
    t = t0 + theta
    x = x0 + k * (np.sin(t) - np.sin(t0))
    y = y0 - k * (np.cos(t) - np.cos(t0))
    z = (z0 + k * (x0 - k * np.sin(t0)) * (np.cos(t0) - np.cos(t))
         - 0.25 * k * k * (np.sin(2 * t) - np.sin(2 * t0)))
    return np.stack(np.broadcast_arrays(x, y, z, t, u), axis=-1)


def speed_squared(u):
    """``|X|^2`` in the frame metric; depends on ``u`` only."""
    u = np.asarray(u, dtype=float)
    return np.sin(2 * u) ** 2 + 4 * np.sin(u) ** 4 + np.cos(u) ** 4


def form_beta() -> KForm:
    """``1/2 dt - dz + x dy``."""

    def f(p):
        x = p[..., X_]
        one = np.ones_like(x)
        return np.stack([0 * x, x, -one, 0.5 * one, 0 * x], axis=-1)

    def partials(p):
        P = np.zeros(p.shape[:-1] + (DIM, DIM))
        P[..., Y_, X_] = 1.0
        return P

    return KForm(DIM, 1, f, partials, name="beta")


def form_mu() -> KForm:
    """``dx ^ dy ^ dz ^ dt ^ du``."""
    return constant_form(DIM, DIM, {(0, 1, 2, 3, 4): 1.0}, name="mu")


# ---------------------------------------------------------------------------
# descent

def fundamental_domain_points(n: int, rng: SplitMix64):
    return rng.points(n, [0, 0, 0, 0, 0], [1, 1, 1, TWO_PI, TWO_PI])


@dataclass(frozen=True)
class DescentReport:
    gamma: LatticeElement
    field_residual: float
    beta_residual: float
    mu_residual: float
    tol: float

    @property
    def max_residual(self):
        return max(self.field_residual, self.beta_residual, self.mu_residual)

    @property
    def passed(self):
        return self.max_residual < self.tol


def verify_descent(gamma: LatticeElement, samples: int, seed: int = 0, field=None,
                   beta=None, mu=None, tol: float = 1e-12) -> DescentReport:
    """Check that the field, beta and mu are invariant under ``gamma``.

    Residuals are maxima over sample points ``p`` of
    ``|(phi_* X)(phi p) - X(phi p)|``, ``|phi^* beta - beta|`` and
    ``|phi^* mu - mu|`` (coefficientwise).
    """
    if samples <= 0:
        raise ContractError("samples must be positive")
    X = field_X() if field is None else field
    beta = form_beta() if beta is None else beta
    mu = form_mu() if mu is None else mu
    phi = gamma.diffeo()
    p = fundamental_domain_points(samples, SplitMix64(seed))
    q = phi(p)
    rx = np.abs(pushforward(phi, X)(q) - X(q)).max()
    rb = np.abs(pullback(phi, beta)(p) - beta(p)).max()
    rm = np.abs(pullback(phi, mu)(p) - mu(p)).max()
    return DescentReport(gamma, float(rx), float(rb), float(rm), tol)
