import numpy as np
import pytest

from closedorbits import ContractError, DomainError, IntegrationError, PeriodNotFoundError, thurston
from closedorbits.flow import (IntegratorConfig, find_period, integrate, lengths_increase_toward_bad_set,
                               orbit_length, orbit_scan, ScanRow)
from closedorbits.forms import VectorField

CFG = IntegratorConfig()
MINUS_DZ = VectorField(5, lambda p: np.broadcast_to([0.0, 0.0, -1.0, 0.0, 0.0], p.shape))


def point(u, x=0.0, y=0.0, z=0.0, t=0.0):
    return np.array([x, y, z, t, u])


def oracle_length(u):
    return np.sqrt(thurston.speed_squared(u)) * np.pi / np.sin(u) ** 2


# ---------------------------------------------------------------------------
# configuration

def test_config_validation():
    with pytest.raises(ContractError):
        IntegratorConfig(method="euler")
    with pytest.raises(ContractError):
        IntegratorConfig(abs_tol=0)
    with pytest.raises(ContractError):
        IntegratorConfig(n_samples=100)


# ---------------------------------------------------------------------------
# integrate

def test_constant_field():
    p = point(0.3, 0.1, 0.2, 0.3, 0.4)
    for method in ("rk45", "rk4"):
        tr = integrate(MINUS_DZ, p, 1.0, IntegratorConfig(method=method))
        assert np.allclose(tr.points[-1], p - np.array([0, 0, 1, 0, 0]), atol=1e-12)


def test_t_rate_at_half_pi():
    p = point(np.pi / 2, 0.2, 0.1, 0.0, 0.5)
    tr = integrate(thurston.field_X(), p, 3.0, CFG, t_eval=np.linspace(0, 3, 7))
    assert np.allclose(tr.points[:, 3], 0.5 + 2 * tr.times, atol=1e-10)
    assert np.allclose(tr.points[:, :3], p[:3], atol=1e-10)


def test_round_trip():
    p = point(0.8, 0.3, -0.1, 0.2, 1.0)
    X = thurston.field_X()
    fwd = integrate(X, p, 5.0, CFG).points[-1]
    back = integrate(X, fwd, -5.0, CFG).points[-1]
    assert np.abs(back - p).max() < 10 * CFG.abs_tol


def test_rk4_batch_matches_closed_form():
    P = np.stack([point(u, 0.1, 0.2, 0.3, 0.4) for u in (0.4, 0.9, 1.3)])
    tr = integrate(thurston.field_W(), P, 1.0, IntegratorConfig(method="rk4", step=1e-3))
    assert np.abs(tr.points[-1] - thurston.w_flow(1.0, P)).max() < 1e-10


def test_max_time_exceeded():
    with pytest.raises(IntegrationError):
        integrate(MINUS_DZ, point(0.3), 20.0, IntegratorConfig(max_time=10.0))


def test_dense_output():
    tr = integrate(thurston.field_X(), point(0.7), 2.0, CFG)
    mid = tr(1.0)
    ref = integrate(thurston.field_X(), point(0.7), 1.0, CFG).points[-1]
    assert np.allclose(mid, ref, atol=1e-8)


# ---------------------------------------------------------------------------
# periods

@pytest.mark.parametrize("u", [np.pi / 6, np.pi / 4, np.pi / 3, np.pi / 2])
def test_W_period_is_two_pi(u):
    rec = find_period(thurston.field_W(), point(u, 0.3, 0.6, 0.1, 0.2), CFG)
    assert abs(rec.period - 2 * np.pi) < 1e-6


@pytest.mark.parametrize("u", [0.3, 0.6, 1.0, np.pi / 2, 2.5])
def test_X_period_formula(u):
    rec = find_period(thurston.field_X(), point(u, 0.2, 0.4, 0.6, 1.0), CFG)
    T = np.pi / np.sin(u) ** 2
    assert abs(rec.period - T) / T < 1e-5
    assert rec.closure_residual < CFG.close_tol
    assert rec.u_drift < CFG.abs_tol * rec.period


def test_reparametrization_consistency():
    u = 0.7
    p = point(u, 0.1, 0.1, 0.1, 0.1)
    TX = find_period(thurston.field_X(), p, CFG).period
    TW = find_period(thurston.field_W(), p, CFG).period
    assert abs(TX * 2 * np.sin(u) ** 2 - TW) < 1e-5
    assert abs(TW - 2 * np.pi) < 1e-5


def test_period_on_bad_set_is_one():
    rec = find_period(thurston.field_X(), point(0.0, 0.3, 0.2, 0.1, 0.5), CFG)
    assert abs(rec.period - 1.0) < 1e-8
    assert abs(rec.length - 1.0) < 1e-8


def test_speed_is_constant_along_orbit():
    rec = find_period(thurston.field_X(), point(0.4, 0.3, 0.1, 0.0, 0.2), CFG)
    g = thurston.frame_metric()
    speed = g.norm(rec.points, thurston.field_X()(rec.points))
    assert np.abs(speed - speed[0]).max() < 1e-8


def test_period_not_found_reports_bound():
    with pytest.raises(PeriodNotFoundError) as err:
        find_period(thurston.field_X(), point(0.05), IntegratorConfig(max_time=100.0))
    assert err.value.bound == 100.0


def test_near_misses_are_rejected():
    # a coarse close_tol would accept early near-returns; the tenfold margin keeps the true period
    rec = find_period(thurston.field_X(), point(0.2), IntegratorConfig(close_tol=1e-4))
    T = np.pi / np.sin(0.2) ** 2
    assert abs(rec.period - T) / T < 1e-5


# ---------------------------------------------------------------------------
# lengths and scans

def test_length_at_half_pi():
    rec = find_period(thurston.field_X(), point(np.pi / 2), CFG)
    assert abs(orbit_length(rec) - 2 * np.pi) < 1e-8


def test_length_ratio():
    l1 = find_period(thurston.field_X(), point(0.5), CFG).length
    l2 = find_period(thurston.field_X(), point(0.05), CFG).length
    assert abs(l1 - oracle_length(0.5)) / oracle_length(0.5) < 1e-6
    assert abs(l2 - oracle_length(0.05)) / oracle_length(0.05) < 1e-6
    assert l2 / l1 > 50


def test_scan_monotone():
    table = orbit_scan([0.5, 0.25, 0.1, 0.05])
    lengths = [r.length for r in table.rows]
    assert all(b > a for a, b in zip(lengths, lengths[1:]))
    assert table.monotone


def test_scan_half_pi_row():
    (row,) = orbit_scan([np.pi / 2]).rows
    assert abs(row.period - np.pi) < 1e-5 and abs(row.length - 2 * np.pi) < 1e-5


def test_scan_empty():
    assert len(orbit_scan([])) == 0


def test_scan_rejects_band_unless_allowed():
    with pytest.raises(DomainError):
        orbit_scan([0.5, 1e-4])
    table = orbit_scan([0.0], allow_bad_set=True)
    assert abs(table.rows[0].period - 1.0) < 1e-8


def test_monotone_flag_detects_violation():
    rows = [ScanRow(0.5, 1, 10.0, 0, 0), ScanRow(0.1, 1, 5.0, 0, 0)]
    assert not lengths_increase_toward_bad_set(rows)
