import numpy as np
import pytest

from closedorbits import ContractError, DomainError, SplitMix64, hopf, thurston
from closedorbits.chains import (NECESSARY_ONLY, build_cylinder, chain_flux, decompose_dalpha, dirac_eval,
                                 flux_report, leaf_integral, normalized_pairings, refine, stokes_residual,
                                 strongly_adapted_probe, thurston_family)
from closedorbits.flow import IntegratorConfig, find_period
from closedorbits.forms import KForm, ScalarField, constant_form, exterior_derivative
from closedorbits.properties import random_form

X = thurston.field_X()
BETA = thurston.form_beta()
CFG = IntegratorConfig()


def quotient_function():
    # f = cos t + sin u + sin(2 pi x): invariant under the lattice and the torus
    def f(p):
        return np.cos(p[..., 3]) + np.sin(p[..., 4]) + np.sin(2 * np.pi * p[..., 0])

    def g(p):
        z = np.zeros_like(p[..., 0])
        return np.stack([2 * np.pi * np.cos(2 * np.pi * p[..., 0]), z, z, -np.sin(p[..., 3]), np.cos(p[..., 4])], -1)

    return ScalarField(5, f, g)


@pytest.fixture(scope="module")
def mesh():
    return build_cylinder(X, thurston_family(0.3, 0.5), 41, 80)


# ---------------------------------------------------------------------------
# Dirac currents and leaves

def test_dirac_eval_examples():
    p = np.array([0.3, 0.2, 0.1, 0.4, 0.9])
    assert abs(dirac_eval(p, X, BETA) - 1) < 1e-15
    dz = constant_form(5, 1, {(2,): 1.0})
    assert abs(dirac_eval(np.array([0.3, 0.2, 0.1, 0.4, np.pi / 2]), X, dz)) < 1e-15
    assert abs(dirac_eval(np.array([0.3, 0.2, 0.1, 0.4, 0.0]), X, -dz) - 1) < 1e-15


@pytest.mark.parametrize("u", [0.3, 0.8, np.pi / 2])
def test_leaf_integral_of_beta_is_period(u):
    rec = find_period(X, np.array([0.1, 0.2, 0.3, 0.4, u]), CFG)
    T = np.pi / np.sin(u) ** 2
    assert abs(leaf_integral(BETA, rec) - T) / T < 1e-5


def test_leaf_integral_on_bad_set():
    rec = find_period(X, np.array([0.1, 0.2, 0.3, 0.4, 0.0]), CFG)
    assert abs(leaf_integral(BETA, rec) - 1) < 1e-8


def test_leaf_integral_of_transverse_form():
    rec = find_period(X, np.array([0.1, 0.2, 0.3, 0.4, 0.6]), CFG)
    du = constant_form(5, 1, {(4,): 1.0})
    assert leaf_integral(du, rec) == 0.0


def test_leaf_integral_positive_for_positive_forms():
    # alpha = beta + 0.1 df has alpha(X) > 0 everywhere, so every leaf pairs positively
    alpha = BETA + 0.1 * exterior_derivative(quotient_function())
    for u in (0.2, 1.0, 2.0):
        rec = find_period(X, np.array([0.5, 0.5, 0.5, 1.0, u]), CFG)
        assert leaf_integral(alpha, rec) > 0


# ---------------------------------------------------------------------------
# cylinders

def test_family_rejects_the_band():
    with pytest.raises(DomainError):
        thurston_family(0.5, 0.0005)
    with pytest.raises(DomainError):
        thurston_family(3.0, 3.2)


def test_mesh_size_contract():
    with pytest.raises(ContractError):
        build_cylinder(X, thurston_family(0.3, 0.5), 2, 10)


def test_degenerate_mesh_has_zero_flux():
    m = build_cylinder(X, thurston_family(0.4, 0.4), 5, 8)
    assert m.degenerate
    assert chain_flux(exterior_derivative(BETA), m) == 0.0
    assert stokes_residual(BETA, m) == 0.0


def test_mesh_is_tangent_to_X():
    m = build_cylinder(X, thurston_family(0.5, 0.4), 21, 40)
    A = np.stack([m.d_s, m.d_theta], -1)
    Xv = X(m.points)
    # batched least squares: residual of X against span(d_s, d_theta)
    rhs = np.einsum("...ia,...i->...a", A, Xv)[..., None]
    sol = np.linalg.solve(np.einsum("...ia,...ib->...ab", A, A), rhs)[..., 0]
    res = Xv - np.einsum("...ia,...a->...i", A, sol)
    assert np.abs(res).max() < 1e-6


def test_mesh_boundary_leaves_match_direct_orbits(mesh):
    fam = mesh.family
    for row, s in ((0, fam.s0), (-1, fam.s1)):
        rec = fam.orbit(s)
        times = mesh.theta * rec.period
        from closedorbits.flow import integrate
        direct = integrate(X, fam.base(s), rec.period, CFG, t_eval=np.append(times, rec.period)).points[:-1]
        assert thurston.quotient_distance(mesh.points[row], direct).max() < CFG.close_tol
    assert mesh.closure_gap < CFG.close_tol


def test_normalization_integers(mesh):
    assert np.array_equal(mesh.n, np.ceil(mesh.periods / (2 * np.pi)).astype(int))


def test_periods_nondecreasing_toward_bad_set():
    fam = thurston_family(0.5, 0.1)
    T = [fam.period(s) for s in np.linspace(0.5, 0.1, 9)]
    assert all(b >= a for a, b in zip(T, T[1:]))


# ---------------------------------------------------------------------------
# fluxes and Stokes

def test_stokes_for_beta(mesh):
    rep = flux_report(BETA, mesh)
    T0, T1 = np.pi / np.sin(0.3) ** 2, np.pi / np.sin(0.5) ** 2
    assert abs(rep.flux - (T1 - T0)) / abs(T1 - T0) < 1e-3
    assert rep.stokes_residual < 1e-3 * abs(rep.flux)
    assert rep.pairing_s1 == pytest.approx(T1, rel=1e-6)


def test_stokes_for_exact_form(mesh):
    df = exterior_derivative(quotient_function())
    assert abs(chain_flux(exterior_derivative(df), mesh)) < 1e-8
    assert stokes_residual(df, mesh) < 1e-8


def test_refinement_reduces_residual(mesh):
    fine = refine(mesh, X)
    assert fine.shape == (81, 160)
    rep = flux_report(BETA, mesh, fine)
    assert rep.refinement_ratio >= 3


def test_flux_needs_two_form(mesh):
    with pytest.raises(ContractError):
        chain_flux(BETA, mesh)


def test_normalized_pairings_bounded():
    fam = thurston_family(0.5, 0.1)
    s = [0.5, 0.3, 0.1]
    vals = normalized_pairings(BETA, fam, s)
    n = np.array([np.ceil(fam.period(v) / (2 * np.pi)) for v in s])
    assert np.all(vals <= 2 * np.pi + 1e-6)
    assert np.all(vals >= 2 * np.pi * (1 - 1 / n) - 1e-6)


# ---------------------------------------------------------------------------
# decomposition and the adapted test

def test_decomposition_hopf():
    # in the ambient chart i_X d alpha = -d|p|^2, so B = |p|^2 (constant on the sphere)
    P = hopf.s3_points(100, SplitMix64(2))
    B = ScalarField(4, lambda p: (p * p).sum(-1), lambda p: 2 * p)
    dec = decompose_dalpha(hopf.contact_form(), B, hopf.hopf_field(), P)
    assert dec.iota_omega_residual < 1e-8 and dec.euler_residual < 1e-8


def test_decomposition_thurston():
    p = np.array([[0.2, 0.3, 0.4, 0.0, np.pi / 4]])
    B = ScalarField(5, lambda p: np.zeros(p.shape[:-1]), lambda p: np.zeros(p.shape))
    dec = decompose_dalpha(BETA, B, X, p)
    assert dec.euler_residual > 0.5
    # i_X omega vanishes by construction whenever B is constant
    assert dec.iota_omega_residual > 0.5


def test_decomposition_scale_invariant_lambda():
    P = thurston.fundamental_domain_points(50, SplitMix64(4))
    B = ScalarField(5, lambda p: np.zeros(p.shape[:-1]), lambda p: np.zeros(p.shape))
    a = decompose_dalpha(BETA, B, X, P).lam(P)
    b = decompose_dalpha(2.0 * BETA, B, X, P).lam(P)
    assert np.allclose(a, b, atol=1e-15)


def test_decomposition_rejects_nonpositive_alpha():
    P = np.array([[0.1, 0.2, 0.3, 0.4, 0.5]])
    B = ScalarField(5, lambda p: np.zeros(p.shape[:-1]))
    with pytest.raises(ContractError, match="0.1"):
        decompose_dalpha(-1.0 * BETA, B, X, P)


def test_probe_beta_fails_closedness():
    P = np.array([[0.3, 0.2, 0.1, 0.0, 0.0]])
    pr = strongly_adapted_probe(BETA, X, P)
    assert pr.positive and not pr.closed and not pr.passed
    assert pr.closedness >= 1.9 and abs(pr.closedness - 2) < 1e-6
    # the failing coefficient sits on du ^ dy, i.e. index (1, 4)
    assert pr.worst_index == (1, 4)
    assert pr.label == NECESSARY_ONLY


def test_probe_hopf_passes():
    pr = strongly_adapted_probe(hopf.contact_form(), hopf.hopf_field(), hopf.s3_points(100, SplitMix64(5)))
    assert pr.passed and pr.closedness < 1e-8


def test_probe_invariant_under_exact_shift():
    rng = SplitMix64(9)
    f = random_form(5, 0, rng, freq=0.5)
    alpha = BETA + 0.05 * exterior_derivative(f)
    alpha = KForm(5, 1, alpha.func, name="beta + df")
    P = thurston.fundamental_domain_points(20, rng)
    P[:, 3:] = 0.0
    a, b = strongly_adapted_probe(BETA, X, P), strongly_adapted_probe(alpha, X, P)
    assert a.passed == b.passed and abs(a.closedness - b.closedness) < 1e-3
