import math

import numpy as np
import pytest

from mhlab.coords import unit_from_angles
from mhlab.index import DEFAULT_PARAMS, IndexParams
from mhlab.refocus import (RayKind, action_integral, cap_scan, classify_ray,
                           orthoradial_monotonicity, radial_action_oracle,
                           return_time_oracle, turning_radius)

P = DEFAULT_PARAMS


def direction(theta1, az=0.0):
    return np.array([math.cos(theta1), math.sin(theta1) * math.cos(az),
                     math.sin(theta1) * math.sin(az)])


@pytest.fixture(scope="module")
def radial_verdict():
    return classify_ray(P, direction(0.0), tol=1e-12)


def test_turning_radius_pinned(radial_verdict):
    r_star = turning_radius(P)
    # chi(2(r*-R)) = 1/2 lands at the smoothstep midpoint: r* = R - 3/4
    assert r_star == pytest.approx(P.R - 0.75, abs=1e-12)
    from mhlab.coords import chi
    assert chi(2 * (r_star - P.R)) == pytest.approx(P.n_inf_sq / P.lam, abs=1e-12)


def test_turning_radius_moves_with_lambda():
    r_hi = turning_radius(IndexParams(lam=40.0, theta0=0.2))
    r_lo = turning_radius(IndexParams(lam=1.05, theta0=0.2))
    assert P.R - 1.0 < r_hi < turning_radius(P) < r_lo < P.R - 0.5


def test_radial_ray_returns(radial_verdict):
    v = radial_verdict
    assert v.kind is RayKind.RETURNING
    assert v.reversal_error <= 1e-6 * math.sqrt(2.0)
    assert v.entry_time == pytest.approx((P.R - 1) / math.sqrt(2), abs=1e-12)


def test_return_time_oracle_agreement(radial_verdict):
    t_oracle = return_time_oracle(P)
    assert abs(radial_verdict.t_r - t_oracle) / t_oracle <= 1e-6


def test_action_oracle_agreement(radial_verdict):
    a_oracle = radial_action_oracle(P)
    assert abs(radial_verdict.action - a_oracle) / a_oracle <= 1e-6


def test_action_constant_over_cap(radial_verdict):
    for frac, az in ((0.5, 0.3), (0.9, 2.0)):
        a = action_integral(P, direction(frac * P.theta0, az))
        assert abs(a - radial_verdict.action) / radial_verdict.action <= 1e-6


def test_action_requires_returning():
    with pytest.raises(ValueError):
        action_integral(P, direction(1.5 * P.theta0))


def test_classification_trio():
    assert classify_ray(P, direction(0.0)).kind is RayKind.RETURNING
    v = classify_ray(P, direction(1.5 * P.theta0))
    assert v.kind is RayKind.DEFLECTED
    assert v.min_distance_after_entry > 1e-3
    assert classify_ray(P, direction(3.0 * P.theta0)).kind is RayKind.STRAIGHT


def test_boundary_classifications():
    # theta0 exactly: angular profile flat, radial analysis applies
    assert classify_ray(P, direction(P.theta0)).kind is RayKind.RETURNING
    # twice theta0 exactly: outside the bump cone for all time
    assert classify_ray(P, direction(2.0 * P.theta0)).kind is RayKind.STRAIGHT


def test_deflected_never_returns():
    for frac in (1.05, 1.3, 1.6, 1.95):
        v = classify_ray(P, direction(frac * P.theta0))
        assert v.kind is RayKind.DEFLECTED
        assert v.min_distance_after_entry > 1e-3
        assert v.diagnostics["final_outgoing"]


def test_orthoradial_monotonicity():
    rep = orthoradial_monotonicity(P, direction(1.5 * P.theta0))
    assert rep.min_theta1_rate > 0.0
    assert rep.max_identity_residual <= 1e-6


def test_orthoradial_requires_deflected():
    with pytest.raises(ValueError):
        orthoradial_monotonicity(P, direction(0.0))


def test_momentum_reversal_over_cap():
    speed = math.sqrt(2.0)
    for frac, az in ((0.0, 0.0), (0.6, 1.2), (1.0, 4.0)):
        v = classify_ray(P, direction(frac * P.theta0, az), tol=1e-12)
        assert v.kind is RayKind.RETURNING
        assert v.reversal_error <= 1e-6 * speed


@pytest.fixture(scope="module")
def small_scan():
    return cap_scan(P, n_samples=1000, tol=1e-10)


def test_scan_cap_edge(small_scan):
    scan = small_scan
    assert abs(scan.cap_edge - P.theta0) <= scan.refined_cell + 1e-12
    assert scan.first_deflected <= P.theta0 + scan.refined_cell + 1e-12
    # all sampled directions inside the cap returned
    import numpy as np
    for th, kind in zip(scan.theta1, scan.kinds):
        if abs(th) <= P.theta0 + 1e-12:
            assert kind is RayKind.RETURNING
        if abs(th) >= 2 * P.theta0:
            assert kind is RayKind.STRAIGHT


def test_scan_uniform_return_time(small_scan):
    assert small_scan.t_r_spread <= 1e-6
    assert small_scan.action_spread <= 1e-6


def test_scan_d2_edge():
    P2 = IndexParams(d=2)
    scan = cap_scan(P2, n_samples=1000, tol=1e-10)
    assert abs(scan.cap_edge - P2.theta0) <= scan.refined_cell + 1e-12


def test_scan_exports(tmp_path, small_scan):
    import csv
    import json
    path = tmp_path / "scan.csv"
    small_scan.to_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["theta1", "theta2", "verdict", "t_r", "action", "min_distance"]
    assert len(rows) == small_scan.n_samples + 1
    summary = json.loads(small_scan.to_json())
    assert summary["counts"]["returning"] > 0
