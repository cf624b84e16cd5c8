"""
Randomised identity checks for the exterior calculus.

Test objects are trigonometric polynomials with seeded random amplitudes,
frequencies and phases, so every coefficient carries exact partials.  The
Lie derivative has an independent oracle here: the time derivative at 0 of
``(phi_t^* w)_p(v_1, ..., v_k)``, where ``phi_t`` and its Jacobian come from
RK4 on the flow and its variational equation.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .forms import (Diffeo, KForm, VectorField, eval_form, exterior_derivative, interior_product,
                    lie_derivative_form, pullback, wedge)
from .rng import SplitMix64


def _trig(rng, rows, n, terms, freq):
    A = rng.uniform((rows, terms), -1.0, 1.0)
    W = freq * rng.normal((rows, terms, n))
    ph = rng.uniform((rows, terms), 0.0, 2 * np.pi)

    def value(p):
        arg = np.einsum("...j,smj->...sm", p, W) + ph
        return (A * np.sin(arg)).sum(-1)

    def partials(p):
        arg = np.einsum("...j,smj->...sm", p, W) + ph
        return np.einsum("...sm,smj->...sj", A * np.cos(arg), W)

    return value, partials


def random_form(n: int, k: int, rng: SplitMix64, terms: int = 3, freq: float = 1.0) -> KForm:
    """k-form whose coefficients are sums of ``terms`` random sines, with exact partials."""
    value, partials = _trig(rng, comb(n, k), n, terms, freq)
    return KForm(n, k, value, partials, name=f"random {k}-form")


def random_field(n: int, rng: SplitMix64, terms: int = 3, freq: float = 1.0) -> VectorField:
    value, partials = _trig(rng, n, n, terms, freq)
    return VectorField(n, value, partials, name="random field")


def random_diffeo(n: int, rng: SplitMix64, eps: float = 0.1, terms: int = 2) -> Diffeo:
    """``p + eps * s(p)`` with ``s`` a random trigonometric map; a small perturbation of the identity."""
    value, partials = _trig(rng, n, n, terms, 1.0 / np.sqrt(n))
    eye = np.eye(n)
    return Diffeo(n, lambda p: p + eps * value(p), lambda p: eye + eps * partials(p), name="random diffeo")


def flow_with_jacobian(X: VectorField, p, t: float, steps: int = 16):
    """``(phi_t(p), D phi_t(p))`` by RK4 on the flow and its variational equation."""
    y = np.array(p, dtype=float)
    J = np.broadcast_to(np.eye(y.shape[-1]), y.shape + (y.shape[-1],)).copy()
    h = t / steps

    def rhs(y, J):
        return X(y), np.einsum("...ij,...jk->...ik", X.jacobian(y), J)

    for _ in range(steps):
        k1 = rhs(y, J)
        k2 = rhs(y + 0.5 * h * k1[0], J + 0.5 * h * k1[1])
        k3 = rhs(y + 0.5 * h * k2[0], J + 0.5 * h * k2[1])
        k4 = rhs(y + h * k3[0], J + h * k3[1])
        y = y + (h / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        J = J + (h / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return y, J


def lie_by_transport(X: VectorField, w: KForm, p, vectors, tau: float = 1e-3, steps: int = 4):
    """``d/dt (phi_t^* w)_p(v...)`` at 0 by a fourth order difference in ``t``."""

    def F(t):
        y, J = flow_with_jacobian(X, p, t, steps)
        return eval_form(w, y, *(np.einsum("...ij,...j->...i", J, v) for v in vectors))

    return (-F(2 * tau) + 8 * F(tau) - 8 * F(-tau) + F(-2 * tau)) / (12 * tau)


@dataclass(frozen=True)
class PropertyReport:
    """Largest violation of each identity over the sampled forms and points."""

    d_squared: float
    leibniz: float
    naturality: float
    iota_iota: float
    cartan: float
    antisymmetry: float


def run_properties(samples: int = 200, seed: int = 0, dims=(3, 4, 5), trials: int = 3,
                   h: float = 1e-4) -> PropertyReport:
    """Evaluate every identity on ``trials`` random objects per dimension.

    Points are drawn from ``[-1, 1]^n``; ``samples`` points per trial.
    """
    rng = SplitMix64(seed)
    worst = dict(d_squared=0.0, leibniz=0.0, naturality=0.0, iota_iota=0.0, cartan=0.0, antisymmetry=0.0)

    def bump(key, value):
        worst[key] = max(worst[key], float(value))

    for n in dims:
        for trial in range(trials):
            k = trial % (n - 1)
            P = rng.uniform((samples, n), -1.0, 1.0)
            w = random_form(n, k, rng)
            bump("d_squared", np.abs(exterior_derivative(exterior_derivative(w, h), h)(P)).max())

            a = random_form(n, 1, rng)
            b = random_form(n, min(1 + trial % 2, n - 2), rng)
            lhs = exterior_derivative(wedge(a, b), h)(P)
            rhs = wedge(exterior_derivative(a, h), b)(P) - wedge(a, exterior_derivative(b, h))(P)
            bump("leibniz", np.abs(lhs - rhs).max())

            phi = random_diffeo(n, rng)
            v = random_form(n, k, rng)
            nat = pullback(phi, exterior_derivative(v, h))(P) - exterior_derivative(pullback(phi, v), h)(P)
            bump("naturality", np.abs(nat).max())

            X = random_field(n, rng)
            top = random_form(n, max(k, 2), rng)
            bump("iota_iota", np.abs(interior_product(X, interior_product(X, top))(P)).max())

            m = 1 + trial % 2
            c = random_form(n, m, rng)
            vecs = [rng.normal((samples, n)) for _ in range(m)]
            cartan = eval_form(lie_derivative_form(X, c, h), P, *vecs)
            bump("cartan", np.abs(cartan - lie_by_transport(X, c, P, vecs)).max())

            vv = [rng.normal((samples, n)) for _ in range(2)]
            two = random_form(n, 2, rng)
            bump("antisymmetry", np.abs(eval_form(two, P, vv[0], vv[1]) + eval_form(two, P, vv[1], vv[0])).max())
    return PropertyReport(**worst)
