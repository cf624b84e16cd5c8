"""
Numerical currents for a flow with closed orbits.

A tangent 2-chain is realised as a cylinder swept by a family of closed
leaves ``L_s``: the mesh point ``(s, th)`` is the time ``th * T(s)`` image of
the base point ``p_s`` under the flow, with ``th`` in ``[0, 1)``.  Fluxes of
2-forms through the cylinder use the periodic trapezoid rule in ``th`` and
composite Simpson in ``s``; the boundary of the cylinder is
``L_{s1} - L_{s0}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from . import thurston
from .errors import ContractError, DomainError
from .flow import IntegratorConfig, OrbitRecord, find_period, rk4_path
from .forms import (KForm, ScalarField, VectorField, eval_form, exterior_derivative,
                    interior_product, multi_indices, wedge)

NECESSARY_ONLY = "necessary conditions only"


def dirac_eval(p, X: VectorField, alpha: KForm):
    """The Dirac current of ``X`` at ``p`` applied to ``alpha``: ``alpha_p(X_p)``."""
    return eval_form(alpha, p, X(p))


def leaf_integral(alpha: KForm, orbit: OrbitRecord) -> float:
    """``int_0^T alpha(X(gamma(th))) dth`` by composite Simpson on the stored samples."""
    if orbit.field is None:
        raise ContractError("orbit record does not carry its vector field")
    vals = eval_form(alpha, orbit.points, orbit.field(orbit.points))
    return float(simpson(vals, x=orbit.times))


@dataclass(frozen=True)
class LeafFamily:
    """Closed leaves ``L_s`` through base points ``p_s`` for ``s`` in ``[s0, s1]``."""

    s0: float
    s1: float
    base: Callable = field(repr=False)
    orbit: Callable = field(repr=False)

    def period(self, s) -> float:
        return self.orbit(s).period


def thurston_family(s0: float, s1: float, x0=0.0, y0=0.0, z0=0.0, t0=0.0,
                    cfg: IntegratorConfig = IntegratorConfig(), eps_u: float = 1e-3,
                    X: Optional[VectorField] = None) -> LeafFamily:
    """Leaves of the Thurston flow through ``(x0, y0, z0, t0, s)``; ``s`` plays the role of ``u``."""
    lo, hi = min(s0, s1), max(s0, s1)
    k = math.floor((lo - eps_u) / np.pi) + 1
    if k * np.pi <= hi + eps_u:
        raise DomainError(f"leaf family [{s0}, {s1}] meets the excluded band around u = {k} pi")
    X = thurston.field_X() if X is None else X
    cache = {}

    def base(s):
        return np.array([x0, y0, z0, t0, s], dtype=float)

    def orbit(s):
        s = float(s)
        if s not in cache:
            cache[s] = find_period(X, base(s), cfg)
        return cache[s]

    return LeafFamily(float(s0), float(s1), base, orbit)


@dataclass(frozen=True)
class CylinderMesh:
    s: np.ndarray
    theta: np.ndarray
    points: np.ndarray = field(repr=False)
    d_s: np.ndarray = field(repr=False)
    d_theta: np.ndarray = field(repr=False)
    periods: np.ndarray = field(repr=False)
    n: np.ndarray = field(repr=False)
    family: LeafFamily = field(repr=False)
    closure_gap: float = 0.0

    @property
    def shape(self):
        return self.points.shape[:2]

    @property
    def degenerate(self):
        return self.family.s0 == self.family.s1


def build_cylinder(X: VectorField, family: LeafFamily, N_s: int, N_theta: int,
                   substeps: int = 8) -> CylinderMesh:
    """Sweep the leaves of ``family`` into an ``N_s x N_theta`` mesh.

    Leaves are integrated together in normalised time with fixed-step RK4,
    ``substeps`` steps per mesh interval.  ``d_s`` uses second order
    differences in ``s`` (one-sided at the ends), ``d_theta = T(s) X``.
    """
    if N_s < 3 or N_theta < 4:
        raise ContractError("mesh needs N_s >= 3 and N_theta >= 4")
    s = np.linspace(family.s0, family.s1, N_s)
    T = np.array([family.period(v) for v in s])
    p0 = np.stack([family.base(v) for v in s])
    times = np.arange(N_theta + 1) / N_theta
    path = rk4_path(lambda Y: T[:, None] * X(Y), p0, times, substeps)
    pts = np.moveaxis(path[:-1], 0, 1)
    gap = float(np.max(thurston.quotient_distance(path[-1], p0)))
    d_theta = T[:, None, None] * X(pts)
    if family.s0 == family.s1:
        d_s = np.zeros_like(pts)
    else:
        d_s = np.gradient(pts, s, axis=0, edge_order=2)
    n = np.ceil(T / (2 * np.pi)).astype(int)
    return CylinderMesh(s, times[:-1], pts, d_s, d_theta, T, n, family, gap)


def chain_flux(w: KForm, mesh: CylinderMesh) -> float:
    """``int w`` over the cylinder, oriented so that its boundary is ``L_{s1} - L_{s0}``."""
    if w.degree != 2:
        raise ContractError("flux needs a 2-form")
    if mesh.degenerate:
        return 0.0
    vals = eval_form(w, mesh.points, mesh.d_s, mesh.d_theta)
    return float(simpson(vals.mean(axis=1), x=mesh.s))


def boundary_pairing(alpha: KForm, mesh: CylinderMesh):
    """``(int_{L_{s1}} alpha, int_{L_{s0}} alpha)`` from directly integrated leaves."""
    fam = mesh.family
    return leaf_integral(alpha, fam.orbit(fam.s1)), leaf_integral(alpha, fam.orbit(fam.s0))


def stokes_residual(alpha: KForm, mesh: CylinderMesh, h: float = 1e-4) -> float:
    """``|int_T d alpha - (int_{L_{s1}} alpha - int_{L_{s0}} alpha)|``."""
    flux = chain_flux(exterior_derivative(alpha, h), mesh)
    top, bottom = boundary_pairing(alpha, mesh)
    return abs(flux - (top - bottom))


@dataclass(frozen=True)
class FluxReport:
    flux: float
    pairing_s1: float
    pairing_s0: float
    n: int
    normalized_flux: float
    stokes_residual: float
    refined_residual: Optional[float] = None

    @property
    def refinement_ratio(self):
        if self.refined_residual is None or self.refined_residual == 0:
            return None
        return self.stokes_residual / self.refined_residual


def flux_report(alpha: KForm, mesh: CylinderMesh, refined: Optional[CylinderMesh] = None,
                h: float = 1e-4) -> FluxReport:
    """Flux of ``d alpha`` through the mesh, normalised by ``n = ceil(T(s1) / 2 pi)``.

    With ``refined`` (same family, finer grid) the Stokes residual is also
    measured there.
    """
    dalpha = exterior_derivative(alpha, h)
    flux = chain_flux(dalpha, mesh)
    top, bottom = boundary_pairing(alpha, mesh)
    n = int(mesh.n[-1])
    refined_res = None
    if refined is not None:
        refined_res = abs(chain_flux(dalpha, refined) - (top - bottom))
    return FluxReport(flux, top, bottom, n, flux / n, abs(flux - (top - bottom)), refined_res)


def refine(mesh: CylinderMesh, X: VectorField, substeps: int = 8) -> CylinderMesh:
    """The same family on a grid with both spacings halved."""
    N_s, N_theta = mesh.shape
    return build_cylinder(X, mesh.family, 2 * (N_s - 1) + 1, 2 * N_theta, substeps)


def normalized_pairings(alpha: KForm, family: LeafFamily, s_values):
    """``(1/n_j) int_{L_{s_j}} alpha`` with ``n_j = ceil(T(s_j) / 2 pi)``."""
    out = []
    for s in s_values:
        rec = family.orbit(s)
        n = math.ceil(rec.period / (2 * np.pi))
        out.append(leaf_integral(alpha, rec) / n)
    return np.array(out)


# ---------------------------------------------------------------------------
# Euler one-form decomposition and the strongly adapted test

def _alpha_of_x(alpha, X, samples):
    ax = dirac_eval(samples, X, alpha)
    bad = np.flatnonzero(np.atleast_1d(ax) <= 0)
    if bad.size:
        pt = np.atleast_2d(samples)[bad[0]]
        raise ContractError(f"alpha(X) <= 0 at sample point {pt.tolist()}")
    return ax


@dataclass(frozen=True)
class Decomposition:
    lam: KForm = field(repr=False)
    omega: KForm = field(repr=False)
    iota_omega_residual: float
    euler_residual: float


def decompose_dalpha(alpha: KForm, B: ScalarField, X: VectorField, samples,
                     h: float = 1e-4) -> Decomposition:
    """Split ``d alpha = -lam ^ dB + omega`` with ``lam = alpha / alpha(X)``.

    Reports ``max |i_X omega|`` and ``max |i_X d alpha + dB|`` over the
    samples; both vanish when ``(alpha, B)`` solves ``i_X d alpha = -dB``.
    """
    samples = np.asarray(samples, dtype=float)
    _alpha_of_x(alpha, X, samples)
    lam = KForm(alpha.dim, 1, lambda p: alpha(p) / dirac_eval(p, X, alpha)[..., None])
    dalpha = exterior_derivative(alpha, h)
    dB = exterior_derivative(B, h)
    omega = dalpha + wedge(lam, dB)
    r_omega = float(np.abs(interior_product(X, omega)(samples)).max())
    r_euler = float(np.abs(interior_product(X, dalpha)(samples) + dB(samples)).max())
    return Decomposition(lam, omega, r_omega, r_euler)


@dataclass(frozen=True)
class AdaptedProbe:
    """Outcome of the necessary-condition test for a strongly adapted one-form."""

    min_alpha_x: float
    closedness: float
    worst_point: np.ndarray
    worst_index: tuple
    tol: float
    label: str = NECESSARY_ONLY

    @property
    def positive(self):
        return self.min_alpha_x > 0

    @property
    def closed(self):
        return self.closedness < self.tol

    @property
    def passed(self):
        return self.positive and self.closed


def strongly_adapted_probe(alpha: KForm, X: VectorField, samples, tol: float = 1e-8,
                           h: float = 1e-4) -> AdaptedProbe:
    """Check ``alpha(X) > 0`` and ``d(i_X d alpha) = 0`` at the samples.

    Closedness of ``i_X d alpha`` is necessary for exactness, so a failure
    rules ``alpha`` out while a pass proves nothing.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    ax = dirac_eval(samples, X, alpha)
    eta = interior_product(X, exterior_derivative(alpha, h))
    c = np.abs(exterior_derivative(eta, h)(samples))
    flat = int(np.argmax(c))
    i, j = np.unravel_index(flat, c.shape)
    return AdaptedProbe(float(ax.min()), float(c.max()), samples[i].copy(),
                        multi_indices(alpha.dim, 2)[j], tol)
