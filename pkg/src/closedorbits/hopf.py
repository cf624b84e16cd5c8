"""
The Hopf circle action on S^3, in ambient coordinates of R^4.

A point ``(x1, x2, x3, x4)`` is the quaternion ``x1 + x2 i + x3 j + x4 k``;
the Hopf field is left multiplication by ``i`` and left multiplication by
``i, j, k`` gives an orthonormal tangent frame of every sphere about 0.
"""
import numpy as np

from .forms import KForm, MetricEval, VectorField, constant_form, interior_product
from .rng import SplitMix64
from .wadsley import CircleAction

DIM = 4

# left multiplication by i, j, k as 4x4 matrices
LEFT_I = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
LEFT_J = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
LEFT_K = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)


def linear_field(A, name="") -> VectorField:
    A = np.asarray(A, dtype=float)
    return VectorField(DIM, lambda p: p @ A.T, lambda p: np.broadcast_to(A, np.shape(p)[:-1] + A.shape), name)


def hopf_field() -> VectorField:
    """``(-x2, x1, -x4, x3)``; its flow is ``p -> exp(i theta) p``."""
    return linear_field(LEFT_I, "hopf")


def s3_frame(p):
    """Columns ``i p, j p, k p``: shape ``(..., 4, 3)``."""
    p = np.asarray(p, dtype=float)
    return np.stack([p @ LEFT_I.T, p @ LEFT_J.T, p @ LEFT_K.T], axis=-1)


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, c, -s], [0, 0, s, c]])


def hopf_action() -> CircleAction:
    return CircleAction(DIM, lambda th, p: np.asarray(p, dtype=float) @ rotation(th).T, hopf_field(),
                        jac=lambda th, p: rotation(th), name="hopf")


def round_metric() -> MetricEval:
    """Euclidean metric of R^4; restricted to S^3 it is the round metric."""
    return MetricEval(DIM, lambda p: np.broadcast_to(np.eye(DIM), np.shape(p)[:-1] + (DIM, DIM)),
                      lambda p: np.zeros(np.shape(p)[:-1] + (DIM,) * 3), name="round")


def contact_form() -> KForm:
    """``x1 dx2 - x2 dx1 + x3 dx4 - x4 dx3``, the round-metric dual of the Hopf field."""
    return KForm(DIM, 1, lambda p: p @ LEFT_I.T,
                 lambda p: np.broadcast_to(LEFT_I, np.shape(p)[:-1] + (DIM, DIM)), name="contact")


def s3_volume() -> KForm:
    """Round volume of the spheres about 0: ``i_N (dx1^dx2^dx3^dx4)`` with ``N = p/|p|``."""
    N = VectorField(DIM, lambda p: p / np.linalg.norm(p, axis=-1, keepdims=True))
    return interior_product(N, constant_form(DIM, DIM, {(0, 1, 2, 3): 1.0}))


# fixed symmetric matrices of the smooth perturbation
_A = np.array([[0.8, 0.3, -0.2, 0.1], [0.3, -0.5, 0.4, 0.0], [-0.2, 0.4, 0.6, -0.3], [0.1, 0.0, -0.3, -0.4]])
_B = np.array([[-0.3, 0.5, 0.1, 0.2], [0.5, 0.7, -0.1, 0.3], [0.1, -0.1, -0.6, 0.2], [0.2, 0.3, 0.2, 0.4]])
_C = np.array([[0.4, -0.1, 0.3, 0.0], [-0.1, 0.2, 0.0, -0.5], [0.3, 0.0, -0.2, 0.1], [0.0, -0.5, 0.1, 0.3]])


def perturbed_metric(eps: float = 0.1) -> MetricEval:
    """``I + eps * (A sin(x1 + 2 x3) + B x2 x4 + C (x1^2 - x4^2))``; not Hopf-invariant."""

    def func(p):
        p = np.asarray(p, dtype=float)
        x1, x2, x3, x4 = (p[..., i, None, None] for i in range(DIM))
        P = _A * np.sin(x1 + 2 * x3) + _B * x2 * x4 + _C * (x1 ** 2 - x4 ** 2)
        return np.eye(DIM) + eps * P

    return MetricEval(DIM, func, name=f"round+{eps}P")


def s3_points(n: int, rng: SplitMix64):
    """``n`` points on the unit sphere from normalised Gaussian draws."""
    v = rng.normal((n, DIM))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
