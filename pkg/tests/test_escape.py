import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from mhlab.coords import chi
from mhlab.dynamics import flow, zero_energy_launch
from mhlab.errors import RootNotBracketed
from mhlab.escape import (certify_lower_bound, convexity_check, escape_functional,
                          escape_rtheta, escape_terms_rtheta, find_mu_nu)
from mhlab.index import DEFAULT_PARAMS, IndexParams

P = DEFAULT_PARAMS


def test_functional_at_origin_and_free_index():
    assert escape_functional(P, np.zeros(3)) == pytest.approx(P.n_inf_sq)
    Pfree = IndexParams(lam=0.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=3) * 3
        assert escape_functional(Pfree, x) == pytest.approx(Pfree.n_inf_sq)


def test_radial_term_positive_in_inner_transition():
    rs = np.linspace(P.R - 0.98, P.R - 0.52, 50)
    F_r, _ = escape_terms_rtheta(P, rs, np.zeros_like(rs))
    assert np.all(F_r > 0.0)


@given(st.integers(0, 10_000_000))
@settings(max_examples=200, deadline=None)
def test_terms_nonnegative(seed):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, P.R + 3.0)
    th = rng.uniform(-math.pi, math.pi)
    F_r, F_t = escape_terms_rtheta(P, r, th)
    assert F_r >= 0.0
    assert F_t >= 0.0


def test_terms_nonnegative_bulk():
    from scipy.stats import qmc
    pts = qmc.Halton(d=2, seed=1).random(1_000_000)
    r = pts[:, 0] * (P.R + 3.0)
    th = (pts[:, 1] * 2 - 1) * math.pi
    F_r, F_t = escape_terms_rtheta(P, r, th)
    assert float(np.min(F_r)) >= 0.0
    assert float(np.min(F_t)) >= 0.0


def test_find_mu_nu():
    mu, nu = find_mu_nu(P)
    assert 1.0 < nu < mu < 2.0
    target = math.sqrt(P.n_inf_sq / P.lam)
    assert chi(mu) == pytest.approx(0.95 * target, abs=1e-12)
    assert chi(nu) == pytest.approx(1.05 * target, abs=1e-12)
    assert 0.0 < chi(mu) < target < chi(nu) < 1.0
    with pytest.raises(RootNotBracketed):
        find_mu_nu(IndexParams(lam=0.9))


def test_certificate_positive():
    rep = certify_lower_bound(P)
    assert rep.alpha_est > 0.0
    assert rep.analytic_tail_bound == pytest.approx(
        P.n_inf_sq - P.lam * chi(rep.mu) ** 2)
    assert rep.alpha_est <= rep.refined_min + 1e-12
    # empirical outside sample must clear the certified bound
    assert rep.outside_sample_min >= rep.alpha_est - 1e-9


def test_certificate_free_index_value():
    rep = certify_lower_bound(IndexParams(n_inf_sq=1.0, lam=2.0, R=3.0,
                                          theta0=0.20))
    assert rep.alpha_est > 0.0


def test_grid_too_small_rejected():
    with pytest.raises(ValueError):
        certify_lower_bound(P, n_r=100, n_theta=401)


def test_convexity_identity_along_ray():
    tr = flow(P, zero_energy_launch(P, np.array([1.0, 0, 0])), 12.0,
              tol=1e-11, record_events=False)
    rep = convexity_check(P, tr, dt=8e-4)
    assert rep.max_residual <= 1e-5
    cert = certify_lower_bound(P)
    assert rep.min_second_derivative >= cert.alpha_est - 1e-6


def test_convexity_free_ray_constant():
    Pfree = IndexParams(lam=0.0)
    tr = flow(Pfree, zero_energy_launch(Pfree, np.array([0.6, 0.8, 0.0])), 8.0,
              tol=1e-11, record_events=False)
    rep = convexity_check(Pfree, tr, dt=2.5e-3)
    assert rep.max_residual <= 1e-8
    # second derivative on a free zero-energy ray is |xi|^2 = 2 n_inf^2
    assert rep.min_second_derivative == pytest.approx(2 * Pfree.n_inf_sq, abs=1e-8)


def test_quadratic_escape_growth():
    rng = np.random.default_rng(7)
    t_r = 3.52
    for _ in range(8):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        tr = flow(P, zero_energy_launch(P, d), 10 * t_r, tol=1e-10,
                  record_events=False)
        r5 = np.linalg.norm(tr.point(5 * t_r).x)
        r10 = np.linalg.norm(tr.point(10 * t_r).x)
        assert r10 >= 2 * r5 - 0.0 - 1e-9


def test_report_serializes():
    import json
    rep = certify_lower_bound(P)
    blob = json.loads(rep.to_json())
    assert blob["alpha_est"] > 0
    assert 1 < blob["nu"] < blob["mu"] < 2
