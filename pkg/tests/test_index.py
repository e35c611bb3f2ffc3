import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from mhlab.index import (DEFAULT_PARAMS, IndexParams, RegionTag, check_admissible,
                         classify_region, grad_n2, grad_n2_batch, hess_n2,
                         hess_n2_batch, n2, n2_radial)

P = DEFAULT_PARAMS


def bump_point(rng):
    """Random point inside the bump where all derivative terms are live."""
    r = rng.uniform(P.R - 0.95, P.R + 0.95)
    th = rng.uniform(-1.9 * P.theta0, 1.9 * P.theta0)
    az = rng.uniform(0, 2 * np.pi)
    return np.array([r * np.cos(th), r * np.sin(th) * np.cos(az),
                     r * np.sin(th) * np.sin(az)])


def test_values():
    assert n2(P, np.zeros(3)) == pytest.approx(P.n_inf_sq)
    assert n2(P, np.array([P.R, 0.0, 0.0])) == pytest.approx(P.n_inf_sq - P.lam)
    assert n2(P, np.array([0.0, 0.0, P.R + 1.5])) == pytest.approx(P.n_inf_sq)
    assert n2(P, np.array([P.R - 1.5, 0.0, 0.0])) == pytest.approx(P.n_inf_sq)


def test_gradient_zero_outside_bump():
    for x in (np.zeros(3), np.array([1.5, 0.2, 0.0]), np.array([6.0, 1.0, -2.0]),
              np.array([0.0, 3.0, 0.0])):
        assert np.all(grad_n2(P, x) == 0.0)


def test_gradient_finite_difference():
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(25):
        x = bump_point(rng)
        g = grad_n2(P, x)
        fd = np.array([(n2(P, x + h * e) - n2(P, x - h * e)) / (2 * h)
                       for e in np.eye(3)])
        assert np.max(np.abs(g - fd)) <= 1e-7


def test_hessian_finite_difference_and_symmetry():
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(25):
        x = bump_point(rng)
        H = hess_n2(P, x)
        assert np.array_equal(H, H.T)
        fd = np.array([(grad_n2(P, x + h * e) - grad_n2(P, x - h * e)) / (2 * h)
                       for e in np.eye(3)])
        assert np.max(np.abs(H - fd)) <= 1e-6


def test_hessian_zero_at_origin():
    assert np.all(hess_n2(P, np.zeros(3)) == 0.0)


def test_batch_matches_scalar():
    rng = np.random.default_rng(3)
    X = np.array([bump_point(rng) for _ in range(40)])
    X[0] = 0.0
    X[1] = np.array([1.0, 0.0, 0.0])
    G = grad_n2_batch(P, X)
    H = hess_n2_batch(P, X)
    for i in range(X.shape[0]):
        assert np.allclose(G[i], grad_n2(P, X[i]), atol=1e-14)
        assert np.allclose(H[i], hess_n2(P, X[i]), atol=1e-12)


@given(st.integers(0, 100_000))
@settings(max_examples=80, deadline=None)
def test_rotation_invariance_about_axis(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=3) * 2.0 + np.array([2.0, 0.0, 0.0])
    a = rng.uniform(0, 2 * np.pi)
    c, s = np.cos(a), np.sin(a)
    A = np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])
    assert n2(P, A @ x) == pytest.approx(n2(P, x), abs=1e-13)


def test_d2_gradient_and_hessian():
    P2 = IndexParams(d=2)
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(25):
        r = rng.uniform(P2.R - 0.95, P2.R + 0.95)
        th = rng.uniform(-1.9 * P2.theta0, 1.9 * P2.theta0) * rng.choice([-1, 1])
        x = np.array([r * np.cos(th), r * np.sin(th)])
        g = grad_n2(P2, x)
        fd = np.array([(n2(P2, x + h * e) - n2(P2, x - h * e)) / (2 * h)
                       for e in np.eye(2)])
        assert np.max(np.abs(g - fd)) <= 1e-7
        H = hess_n2(P2, x)
        fdh = np.array([(grad_n2(P2, x + h * e) - grad_n2(P2, x - h * e)) / (2 * h)
                        for e in np.eye(2)])
        assert np.max(np.abs(H - fdh)) <= 1e-6


def test_classify_region():
    assert classify_region(P, np.array([P.R, 0.0, 0.0])) is RegionTag.FORBIDDEN
    assert classify_region(P, np.zeros(3)) is RegionTag.FREE
    x = np.array([P.R - 0.9, 0.0, 0.0])
    assert n2(P, x) > 0.0
    assert classify_region(P, x) is RegionTag.BUMP
    # forbidden set sits inside the bump set
    rng = np.random.default_rng(6)
    for _ in range(200):
        x = bump_point(rng)
        if classify_region(P, x) is RegionTag.FORBIDDEN:
            r = np.linalg.norm(x)
            assert P.R - 1 <= r <= P.R + 1


def test_admissibility():
    assert check_admissible(P) == []
    assert 1 - math.cos(0.5) < 1.0 / 6.0
    bad = IndexParams(theta0=0.30)
    probs = check_admissible(bad)
    assert any("smallness" in v for v in probs)
    assert 1 - math.cos(0.6) > 1.0 / 6.0
    bad2 = IndexParams(lam=0.5)
    assert any("lambda" in v for v in check_admissible(bad2))
    bad3 = IndexParams(R=0.8)
    assert any("R must exceed 1" in v for v in check_admissible(bad3))


def test_json_round_trip():
    blob = P.to_json_dict()
    assert set(blob) == {"n_inf_sq", "lambda", "R", "theta0", "d"}
    assert IndexParams.from_json_dict(blob) == P
    with pytest.raises(ValueError):
        IndexParams.from_json_dict({"n_inf_sq": 1.0, "bogus": 2})


def test_radial_profile_matches_full_index_on_axis():
    rs = np.linspace(0, 6, 200)
    for r in rs:
        assert n2_radial(P, r) == pytest.approx(n2(P, np.array([r, 0.0, 0.0])))
