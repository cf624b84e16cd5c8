"""
Orbit integration in the universal cover and closed-orbit detection in the
quotient M.

Trajectories are never canonicalised while integrating; the quotient only
enters through :func:`closedorbits.thurston.quotient_distance` when looking
for returns.  Return detection is two-phase: the distance to the initial
point is sampled on a coarse time grid, and each sampled local minimum is
refined by bisection on the sign of the derivative of the squared distance
to the nearest lift of the initial point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import minimize_scalar

from . import thurston
from .errors import ContractError, DomainError, IntegrationError, PeriodNotFoundError
from .forms import MetricEval, VectorField

_SCIPY_METHODS = {"rk45": "RK45", "dop853": "DOP853"}


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45"
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    step: float = 1e-2
    max_time: float = 1e4
    close_tol: float = 1e-6
    n_samples: int = 2001
    bisect_tol: float = 1e-10

    def __post_init__(self):
        if self.method not in ("rk4", *_SCIPY_METHODS):
            raise ContractError(f"unknown integration method {self.method!r}")
        if min(self.abs_tol, self.rel_tol, self.step, self.close_tol) <= 0 or self.max_time <= 0:
            raise ContractError("tolerances, step and max_time must be positive")
        if self.n_samples < 3 or self.n_samples % 2 == 0:
            raise ContractError("n_samples must be odd and at least 3 (Simpson rule)")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    dense: Optional[Callable] = field(default=None, repr=False)

    def __call__(self, t):
        if self.dense is None:
            raise ContractError("trajectory has no dense output")
        return self.dense(t)


@dataclass(frozen=True)
class OrbitRecord:
    """A closed orbit: period in flow time, frame-metric length, samples over one period."""

    initial_point: np.ndarray
    period: float
    length: float
    closure_residual: float
    times: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    u_drift: float = 0.0
    field: Optional[VectorField] = field(default=None, repr=False)

    @property
    def n_samples(self):
        return len(self.times)


def rk4_path(fun, y0, times, substeps: int = 1):
    """Classical RK4 through the given output times, ``substeps`` steps per interval.

    ``y0`` may carry leading batch axes; ``fun`` must broadcast over them.
    Returns an array of shape ``(len(times), *y0.shape)``.
    """
    y = np.array(y0, dtype=float)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    for i in range(1, len(times)):
        h = (times[i] - times[i - 1]) / substeps
        for _ in range(substeps):
            k1 = fun(y)
            k2 = fun(y + 0.5 * h * k1)
            k3 = fun(y + 0.5 * h * k2)
            k4 = fun(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i] = y
    return out


def _solve(X, p0, t0, t1, cfg, t_eval=None, dense=False):
    sol = solve_ivp(lambda t, y: X(y), (t0, t1), p0, method=_SCIPY_METHODS[cfg.method],
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, t_eval=t_eval, dense_output=dense)
    if sol.status < 0:
        raise IntegrationError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    return sol


def integrate(X: VectorField, p0, T: float, cfg: IntegratorConfig = IntegratorConfig(),
              t_eval=None) -> Trajectory:
    """Integrate ``X`` from ``p0`` for time ``T`` (negative ``T`` runs backwards).

    With ``method="rk4"`` the fixed step ``cfg.step`` is used and ``p0`` may
    be a batch of points.
    """
    p0 = np.asarray(p0, dtype=float)
    if abs(T) > cfg.max_time:
        raise IntegrationError(f"requested time {T} exceeds max_time {cfg.max_time}")
    if T == 0:
        return Trajectory(np.array([0.0]), p0[None].copy())
    if cfg.method == "rk4":
        n = max(1, math.ceil(abs(T) / cfg.step))
        times = np.linspace(0.0, T, n + 1)
        pts = rk4_path(X, p0, times)
        if t_eval is not None:
            raise ContractError("t_eval is only supported by the adaptive methods")
        return Trajectory(times, pts)
    if p0.ndim != 1:
        raise ContractError("adaptive integration takes a single initial point")
    sol = _solve(X, p0, 0.0, T, cfg, t_eval=t_eval, dense=True)
    return Trajectory(sol.t, sol.y.T, lambda t: sol.sol(t).T)


class _Segments:
    """Dense output stitched from consecutive integration windows."""

    def __init__(self, dim):
        self.dim = dim
        self.ends = []
        self.sols = []

    def add(self, t1, sol):
        self.ends.append(t1)
        self.sols.append(sol)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.minimum(np.searchsorted(self.ends, t), len(self.sols) - 1)
        out = np.empty((len(t), self.dim))
        for i in np.unique(idx):
            m = idx == i
            out[m] = self.sols[i](t[m]).T
        return out


def _speed(X, metric, pts):
    return metric.norm(pts, X(pts))


def find_period(X: VectorField, p0, cfg: IntegratorConfig = IntegratorConfig(),
                t_guess: Optional[float] = None, metric: Optional[MetricEval] = None) -> OrbitRecord:
    """Smallest ``T > 0`` with ``phi_T(p0) = p0`` in the quotient.

    Raises :class:`PeriodNotFoundError` when no return is seen before
    ``cfg.max_time``.
    """
    if cfg.method == "rk4":
        cfg = IntegratorConfig(**{**cfg.__dict__, "method": "rk45"})
    p0 = np.asarray(p0, dtype=float)
    metric = thurston.frame_metric() if metric is None else metric
    h_scan = 0.05 if t_guess is None else min(0.05, t_guess / 100.0)
    window = 8.0 if t_guess is None else max(1.25 * t_guess, 20 * h_scan)
    segs = _Segments(p0.size)
    t0, y0 = 0.0, p0
    d_hist = [0.0]
    k_next = 1
    while t0 < cfg.max_time:
        t1 = min(t0 + window, cfg.max_time)
        sol = _solve(X, y0, t0, t1, cfg, dense=True).sol
        segs.add(t1, sol)
        k_last = math.floor(t1 / h_scan + 1e-12)
        ks = np.arange(k_next, k_last + 1)
        if len(ks):
            taus = ks * h_scan
            pts = sol(taus).T
            vmax = float(_speed(X, metric, pts).max())
            thresh = 1.5 * vmax * h_scan + cfg.close_tol
            d = thurston.torus_distance(pts, p0)
            near = d < thresh
            if np.any(near):
                d[near] = thurston.quotient_distance(pts[near], np.broadcast_to(p0, pts[near].shape))
            d_all = np.concatenate([d_hist, d])
            # index j in d_all corresponds to time (k_next - len(d_hist) + j) * h_scan
            base = k_next - len(d_hist)
            for j in range(1, len(d_all) - 1):
                if d_all[j] < thresh and d_all[j] <= d_all[j - 1] and d_all[j] <= d_all[j + 1]:
                    k = base + j
                    res = _refine(X, metric, segs, p0, (k - 1) * h_scan, (k + 1) * h_scan, cfg)
                    if res is not None:
                        return _record(X, metric, segs, p0, res[0], res[1], cfg)
            d_hist = list(d_all[-2:])
            k_next = k_last + 1
        y0 = sol(t1)
        t0 = t1
        window *= 2
    raise PeriodNotFoundError(f"no return to the initial point before t = {cfg.max_time}", cfg.max_time)


def _refine(X, metric, segs, p0, a, b, cfg):
    a = max(a, 0.0)
    mid = segs(0.5 * (a + b))[0]
    target = thurston.nearest_lift(mid, p0)

    def slope(tau):
        q = segs(tau)[0]
        G = metric(0.5 * (q + target))
        return float((q - target) @ G @ X(q))

    fa, fb = slope(a), slope(b)
    if fa < 0 < fb:
        while b - a > cfg.bisect_tol:
            m = 0.5 * (a + b)
            if slope(m) < 0:
                a = m
            else:
                b = m
        tau = 0.5 * (a + b)
    else:
        r = minimize_scalar(lambda s: float(thurston.frame_distance(segs(s)[0], target)),
                            bounds=(a, b), method="bounded", options={"xatol": cfg.bisect_tol})
        tau = float(r.x)
    if tau <= 0:
        return None
    dist = float(thurston.quotient_distance(segs(tau)[0], p0))
    if dist < cfg.close_tol / 10:
        return tau, dist
    return None


def _record(X, metric, segs, p0, T, dist, cfg):
    times = np.linspace(0.0, T, cfg.n_samples)
    pts = segs(times)
    speed = _speed(X, metric, pts)
    length = float(simpson(speed, x=times))
    drift = float(np.abs(pts[:, thurston.U_] - p0[thurston.U_]).max()) if p0.size == thurston.DIM else 0.0
    return OrbitRecord(p0.copy(), float(T), length, dist, times, pts, drift, X)


def orbit_length(record: OrbitRecord, metric: Optional[MetricEval] = None) -> float:
    """Composite Simpson quadrature of ``|X|`` over the stored period."""
    metric = thurston.frame_metric() if metric is None else metric
    if record.field is None:
        raise ContractError("orbit record does not carry its vector field")
    return float(simpson(_speed(record.field, metric, record.points), x=record.times))


@dataclass(frozen=True)
class ScanRow:
    u: float
    period: float
    length: float
    closure_residual: float
    u_drift: float


@dataclass(frozen=True)
class ScanTable:
    rows: tuple
    monotone: bool

    def __len__(self):
        return len(self.rows)


def lengths_increase_toward_bad_set(rows: Sequence[ScanRow]) -> bool:
    """True if, over rows with ``u`` in ``(0, pi/2]``, length strictly grows as ``u`` decreases."""
    inner = sorted((r for r in rows if 0 < r.u <= np.pi / 2), key=lambda r: -r.u)
    return all(b.length > a.length for a, b in zip(inner, inner[1:]))


def orbit_scan(u_values, x0=0.0, y0=0.0, z0=0.0, t0=0.0, cfg: IntegratorConfig = IntegratorConfig(),
               eps_u: float = 1e-3, allow_bad_set: bool = False, field: Optional[VectorField] = None) -> ScanTable:
    """Period and length of the orbit through ``(x0, y0, z0, t0, u)`` for each ``u``."""
    X = thurston.field_X() if field is None else field
    rows = []
    for u in u_values:
        if thurston.distance_to_bad_set(u) <= eps_u and not allow_bad_set:
            raise DomainError(f"u = {u} lies in the excluded band around u = 0 mod pi")
        rec = find_period(X, np.array([x0, y0, z0, t0, u], dtype=float), cfg)
        rows.append(ScanRow(float(u), rec.period, rec.length, rec.closure_residual, rec.u_drift))
    return ScanTable(tuple(rows), lengths_increase_toward_bad_set(rows))
