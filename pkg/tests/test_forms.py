import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from closedorbits import ContractError, SplitMix64, UnsupportedOperation, thurston
from closedorbits.forms import (Diffeo, KForm, MetricEval, ScalarField, VectorField, constant_form,
                                eval_form, exterior_derivative, index_of, interior_product,
                                lie_derivative_form, lie_derivative_metric, multi_indices, pullback,
                                pushforward, wedge, wedge_power)
from closedorbits.hopf import hopf_field, round_metric, s3_points
from closedorbits.properties import lie_by_transport, random_diffeo, random_field, random_form

E = np.eye(5)
dx, dy, dz, dt, du = (constant_form(5, 1, {(i,): 1.0}) for i in range(5))
seeds = st.integers(min_value=0, max_value=2**32)


def x_dy():
    # x dy with exact partials
    def f(p):
        out = np.zeros(p.shape[:-1] + (5,))
        out[..., 1] = p[..., 0]
        return out

    def d(p):
        out = np.zeros(p.shape[:-1] + (5, 5))
        out[..., 1, 0] = 1.0
        return out

    return KForm(5, 1, f, d)


# ---------------------------------------------------------------------------
# bookkeeping

def test_multi_indices_lexicographic():
    assert multi_indices(4, 2) == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    assert index_of(5, (1, 3)) == multi_indices(5, 2).index((1, 3))


def test_degree_out_of_range():
    with pytest.raises(ContractError):
        KForm(3, 4, lambda p: p)


# ---------------------------------------------------------------------------
# eval_form

def test_eval_dxdy_on_basis():
    dxdy = wedge(dx, dy)
    p = np.zeros(5)
    assert eval_form(dxdy, p, E[0], E[1]) == 1.0
    assert eval_form(dxdy, p, E[1], E[0]) == -1.0


def test_beta_on_X_at_sample_point():
    p = np.array([0.3, 0.7, -1.2, 2.0, 0.9])
    assert abs(eval_form(thurston.form_beta(), p, thurston.field_X()(p)) - 1.0) < 1e-15


def test_eval_form_wrong_vector_count():
    with pytest.raises(ContractError):
        eval_form(wedge(dx, dy), np.zeros(5), E[0])


def test_eval_form_wrong_dimension():
    with pytest.raises(ContractError):
        eval_form(dx, np.zeros(4), np.zeros(4))


@given(seeds, st.integers(min_value=2, max_value=5))
def test_antisymmetry_exact(seed, k):
    rng = SplitMix64(seed)
    w = random_form(5, k, rng)
    P = rng.uniform((20, 5), -2, 2)
    vecs = [rng.normal((20, 5)) for _ in range(k)]
    base = eval_form(w, P, *vecs)
    for i, j in itertools.combinations(range(k), 2):
        swapped = list(vecs)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        assert np.array_equal(eval_form(w, P, *swapped), -base)


@given(seeds)
def test_eval_form_multilinear(seed):
    rng = SplitMix64(seed)
    w = random_form(4, 2, rng)
    P = rng.uniform((10, 4), -1, 1)
    a, b, c = (rng.normal((10, 4)) for _ in range(3))
    lhs = eval_form(w, P, 2.0 * a + 3.0 * c, b)
    rhs = 2.0 * eval_form(w, P, a, b) + 3.0 * eval_form(w, P, c, b)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12)


# ---------------------------------------------------------------------------
# wedge

def test_wedge_coefficients():
    w = wedge(dx, dy)(np.zeros(5))
    assert w[index_of(5, (0, 1))] == 1.0 and np.count_nonzero(w) == 1
    assert wedge(dy, dx)(np.zeros(5))[index_of(5, (0, 1))] == -1.0


def test_wedge_degree_overflow():
    top = constant_form(3, 3, {(0, 1, 2): 1.0})
    one = constant_form(3, 1, {(0,): 1.0})
    with pytest.raises(ContractError):
        wedge(top, one)


def test_dbeta_squared_vanishes(quotient_points):
    db = exterior_derivative(thurston.form_beta())
    assert np.abs(wedge(db, db)(quotient_points)).max() < 1e-9
    assert np.abs(wedge_power(db, 2)(quotient_points)).max() < 1e-9


@given(seeds)
def test_one_form_squared_is_zero(seed):
    rng = SplitMix64(seed)
    a = random_form(5, 1, rng)
    assert np.abs(wedge(a, a)(rng.uniform((30, 5), -1, 1))).max() < 1e-14


@given(seeds)
def test_wedge_graded_commutative(seed):
    rng = SplitMix64(seed)
    a, b = random_form(5, 1, rng), random_form(5, 2, rng)
    P = rng.uniform((20, 5), -1, 1)
    assert np.allclose(wedge(a, b)(P), wedge(b, a)(P), atol=1e-14)
    c = random_form(5, 1, rng)
    assert np.allclose(wedge(a, c)(P), -wedge(c, a)(P), atol=1e-14)


# ---------------------------------------------------------------------------
# exterior derivative

def test_d_x_dy():
    w = exterior_derivative(x_dy())(np.array([0.4, 0.1, 0.2, 0.3, 0.5]))
    expected = np.zeros(10)
    expected[index_of(5, (0, 1))] = 1.0
    assert np.allclose(w, expected, atol=1e-14)


def test_d_beta(quotient_points):
    got = exterior_derivative(thurston.form_beta())(quotient_points)
    expected = np.zeros(10)
    expected[index_of(5, (0, 1))] = 1.0
    assert np.abs(got - expected).max() < 1e-14


def test_d_without_partials_uses_differences():
    f = ScalarField(3, lambda p: np.sin(p[..., 0]) * p[..., 2] ** 2)
    got = exterior_derivative(f, h=1e-3)(np.array([0.3, 0.1, 0.7]))
    exact = [np.cos(0.3) * 0.49, 0.0, 2 * np.sin(0.3) * 0.7]
    assert np.allclose(got, exact, atol=1e-10)


@given(seeds, st.integers(min_value=0, max_value=3))
def test_d_squared_zero(seed, k):
    rng = SplitMix64(seed)
    w = random_form(5, k, rng)
    P = rng.uniform((30, 5), -1, 1)
    assert np.abs(exterior_derivative(exterior_derivative(w))(P)).max() < 1e-8


@given(seeds, st.integers(min_value=0, max_value=2), st.integers(min_value=0, max_value=2))
def test_leibniz(seed, ka, kb):
    rng = SplitMix64(seed)
    a, b = random_form(5, ka, rng), random_form(5, kb, rng)
    P = rng.uniform((30, 5), -1, 1)
    lhs = exterior_derivative(wedge(a, b))(P)
    rhs = wedge(exterior_derivative(a), b)(P) + (-1) ** ka * wedge(a, exterior_derivative(b))(P)
    assert np.abs(lhs - rhs).max() < 1e-8


def test_d_of_top_form_rejected():
    with pytest.raises(ContractError):
        exterior_derivative(thurston.form_mu())


# ---------------------------------------------------------------------------
# interior product

def test_iota_of_function_rejected():
    f = ScalarField(5, lambda p: p[..., 0]).as_form()
    with pytest.raises(ContractError):
        interior_product(thurston.field_X(), f)


@given(seeds, st.integers(min_value=2, max_value=5))
def test_iota_iota_zero(seed, k):
    rng = SplitMix64(seed)
    X, w = random_field(5, rng), random_form(5, k, rng)
    P = rng.uniform((30, 5), -1, 1)
    assert np.abs(interior_product(X, interior_product(X, w))(P)).max() < 1e-13


def test_iota_X_mu_matches_displayed_coefficients(quotient_points):
    P = quotient_points
    x, t, u = P[:, 0], P[:, 3], P[:, 4]
    got = interior_product(thurston.field_X(), thurston.form_mu())(P)
    s2u = np.sin(2 * u)
    expected = {
        (1, 2, 3, 4): s2u * np.cos(t),
        (0, 2, 3, 4): -s2u * np.sin(t),
        (0, 1, 3, 4): x * np.sin(t) * s2u - np.cos(u) ** 2,
        (0, 1, 2, 4): -2 * np.sin(u) ** 2,
        (0, 1, 2, 3): np.zeros_like(u),
    }
    for I, value in expected.items():
        assert np.abs(got[:, index_of(5, I)] - value).max() < 1e-14


def test_d_iota_X_mu_vanishes(quotient_points):
    w = exterior_derivative(interior_product(thurston.field_X(), thurston.form_mu()))
    assert np.abs(w(quotient_points)).max() < 1e-9


def test_iota_matches_first_slot(rng):
    X, w = random_field(4, rng), random_form(4, 3, rng)
    P = rng.uniform((10, 4), -1, 1)
    v, z = rng.normal((10, 4)), rng.normal((10, 4))
    assert np.allclose(eval_form(interior_product(X, w), P, v, z), eval_form(w, P, X(P), v, z), atol=1e-13)


# ---------------------------------------------------------------------------
# pullback and pushforward

def test_pushforward_of_V2_under_lattice(rng):
    V2 = thurston.frame_V2()
    for a, b, c in [(1, 0, 0), (2, -1, 3), (-2, 2, 1)]:
        phi = thurston.LatticeElement(a, b, c).diffeo()
        Q = thurston.fundamental_domain_points(50, rng) * 3
        assert np.abs(pushforward(phi, V2)(Q) - V2(Q)).max() < 1e-12


def test_pullback_identity(rng):
    w = random_form(5, 2, rng)
    P = rng.uniform((20, 5), -1, 1)
    assert np.array_equal(pullback(Diffeo.identity(5), w)(P), w(P))


def test_pullback_of_minus_dz_plus_x_dy(rng):
    w = x_dy() - dz
    P = thurston.fundamental_domain_points(100, rng)
    for g in [(1, 1, 1), (-2, 1, 0), (0, 2, -2)]:
        phi = thurston.LatticeElement(*g).diffeo()
        assert np.abs(pullback(phi, w)(P) - w(P)).max() < 1e-14


def test_pushforward_needs_inverse():
    phi = Diffeo(2, lambda p: 2 * p, lambda p: 2 * np.eye(2))
    with pytest.raises(UnsupportedOperation):
        pushforward(phi, VectorField(2, lambda p: p))


def test_singular_jacobian_rejected():
    phi = Diffeo(2, lambda p: p * 0, lambda p: np.zeros((2, 2)))
    with pytest.raises(ContractError):
        phi.jacobian(np.zeros(2))


@given(seeds, st.integers(min_value=0, max_value=3))
def test_pullback_commutes_with_d(seed, k):
    rng = SplitMix64(seed)
    phi = random_diffeo(5, rng)
    w = random_form(5, k, rng)
    P = rng.uniform((20, 5), -1, 1)
    lhs = pullback(phi, exterior_derivative(w))(P)
    rhs = exterior_derivative(pullback(phi, w))(P)
    assert np.abs(lhs - rhs).max() < 1e-7


# ---------------------------------------------------------------------------
# Lie derivatives

def test_lie_derivative_of_mu_vanishes(quotient_points):
    L = lie_derivative_form(thurston.field_X(), thurston.form_mu())
    assert np.abs(L(quotient_points)).max() < 1e-9


def test_lie_derivative_metric_hopf_round():
    P = s3_points(50, SplitMix64(1))
    assert np.abs(lie_derivative_metric(hopf_field(), round_metric(), P)).max() < 1e-14


def test_lie_derivative_metric_detects_non_killing():
    g = MetricEval(2, lambda p: np.eye(2) * (1 + p[..., 0, None, None] ** 2))
    X = VectorField(2, lambda p: np.broadcast_to([1.0, 0.0], p.shape))
    L = lie_derivative_metric(X, g, np.array([0.5, 0.0]))
    assert np.allclose(L, np.eye(2) * 1.0, atol=1e-9)


@given(seeds, st.integers(min_value=0, max_value=2))
def test_cartan_matches_flow_transport(seed, k):
    rng = SplitMix64(seed)
    X, w = random_field(4, rng), random_form(4, k, rng)
    P = rng.uniform((10, 4), -1, 1)
    vecs = [rng.normal((10, 4)) for _ in range(k)]
    cartan = eval_form(lie_derivative_form(X, w), P, *vecs)
    assert np.abs(cartan - lie_by_transport(X, w, P, vecs)).max() < 1e-5


def test_field_jacobians_match_differences(quotient_points):
    from closedorbits.forms import fd_partials
    P = quotient_points[:100]
    for F in (thurston.field_X(), thurston.field_W()):
        Q = P.copy()
        Q[:, 4] = np.clip(Q[:, 4], 0.3, 2.8)
        assert np.abs(F.jacobian(Q) - fd_partials(F.func, Q)).max() < 1e-8


def test_scaled_form_partials(rng):
    w = random_form(3, 1, rng)
    f = ScalarField(3, lambda p: p[..., 0] * p[..., 1], lambda p: np.stack([p[..., 1], p[..., 0], 0 * p[..., 0]], -1))
    P = rng.uniform((10, 3), -1, 1)
    from closedorbits.forms import fd_partials
    assert np.allclose(w.scaled(f).partials(P), fd_partials(w.scaled(f), P), atol=1e-9)
