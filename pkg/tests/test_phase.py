import math

import numpy as np
import pytest

from mhlab.coords import unit_from_angles
from mhlab.index import DEFAULT_PARAMS, IndexParams
from mhlab.phase import (ExtendedPoint, SyntheticAmplitude, SyntheticPhase,
                         brute_force_oscillatory, det_neg_i_inv_sqrt,
                         fd_gradient, kernel_dimension, normal_hessian, psi,
                         return_data, stationary_phase_constant,
                         stationary_phase_leading, stationary_point,
                         stationary_residual, synthetic_oscillatory_oracle)

P = DEFAULT_PARAMS


@pytest.fixture(scope="module")
def m0():
    return stationary_point(P)


@pytest.fixture(scope="module")
def m_cap():
    return stationary_point(P, angles=(0.5 * P.theta0, 1.1))


def test_psi_value_is_cap_action(m0):
    rd = return_data(P)
    val = psi(P, m0)
    assert val.real == pytest.approx(rd.action, rel=1e-10)
    assert abs(val.imag) <= 1e-10


def test_psi_at_time_zero_origin():
    d = P.d
    zero = np.zeros(d)
    p = math.sqrt(2.0) * unit_from_angles((0.0,) * (d - 1))
    pt = ExtendedPoint(t=0.0, q=zero, p=p, x=zero, xi=p, y=zero, eta=p)
    # x = q = y = q_0, xi = p, eta = p_0: psi = x.xi - y.eta = 0
    assert psi(P, pt) == pytest.approx(0.0, abs=1e-12)


def test_stationary_residual_on_set(m0, m_cap):
    for m in (m0, m_cap):
        gn, im = stationary_residual(P, m)
        assert gn <= 1e-5
        assert abs(im) <= 1e-8


def test_off_set_point_not_stationary(m0):
    rng = np.random.default_rng(11)
    z = m0.pack() + 0.1 * rng.normal(size=m0.pack().size)
    m_off = ExtendedPoint.unpack(z, P.d)
    gn, _ = stationary_residual(P, m_off)
    assert gn > 1e-2


def test_imaginary_part_nonnegative_nearby(m0):
    from mhlab.phase import _FlowTable, _psi_from_member
    rng = np.random.default_rng(3)
    n_qp, n_rest = 40, 10
    qs = m0.q + 0.05 * rng.normal(size=(n_qp, 3))
    ps = m0.p + 0.05 * rng.normal(size=(n_qp, 3))
    table = _FlowTable(P, qs, ps, m0.t * 1.05 + 0.1, tol=1e-10)
    worst = 0.0
    for i in range(n_qp):
        for _ in range(n_rest):
            dz = 0.05 * rng.normal(size=13)
            m = ExtendedPoint(t=m0.t + dz[0], q=qs[i], p=ps[i],
                              x=m0.x + dz[1:4], xi=m0.xi + dz[4:7],
                              y=m0.y + dz[7:10], eta=m0.eta + dz[10:13])
            worst = min(worst, _psi_from_member(P, table, i, m).imag)
    assert worst >= -1e-10


def test_kernel_dimension_d3(m0):
    diag = kernel_dimension(P, m0)
    assert diag.nullity == 2
    assert diag.kernel_angle <= 1e-3
    s = diag.singular_values
    assert s[-3] >= 10.0 * 1e-4 * s[0]
    H = diag.hessian
    assert np.linalg.norm(H - H.T) <= 1e-5 * np.linalg.norm(H)


def test_kernel_dimension_interior_cap(m_cap):
    diag = kernel_dimension(P, m_cap)
    assert diag.nullity == 2
    assert diag.kernel_angle <= 1e-3


def test_kernel_dimension_d2():
    P2 = IndexParams(d=2)
    m = stationary_point(P2)
    diag = kernel_dimension(P2, m)
    assert diag.nullity == 1
    assert diag.kernel_angle <= 1e-3


def test_normal_hessian_invariance():
    det0, sig0, H0 = normal_hessian(P)
    det1, sig1, H1 = normal_hessian(P, angles=(0.5 * P.theta0, 0.7))
    assert abs(det0) > 0
    assert abs(det1 - det0) / abs(det0) <= 1e-4
    assert sig0 == sig1
    assert H0.shape == (17, 17)


def test_normal_hessian_step_consistency():
    det_a, _, _ = normal_hessian(P, h=5e-3)
    det_b, _, _ = normal_hessian(P, h=2.5e-3)
    assert abs(det_a - det_b) / abs(det_a) <= 1e-4


def test_constant_nonzero_and_direction_independent():
    rep0 = stationary_phase_constant(P)
    assert abs(rep0.value) > 0
    rep1 = stationary_phase_constant(P, angles=(0.4 * P.theta0, 2.0))
    assert abs(rep1.value - rep0.value) / abs(rep0.value) <= 1e-4
    blob = rep0.to_dict()
    assert "paper_printed_variants" in blob


def test_branch_rule_gaussian_case():
    # H = i Id: int e^{-|z|^2/(2 eps)} = (2 pi eps)^{k/2} exactly
    for k in (1, 2, 3):
        H = 1j * np.eye(k)
        assert det_neg_i_inv_sqrt(H) == pytest.approx(1.0, abs=1e-13)


def test_branch_rule_fresnel_case():
    # real positive curvature: det(-iH)^{-1/2} = e^{i pi/4} per dimension
    got = det_neg_i_inv_sqrt(np.eye(2))
    assert got == pytest.approx(np.exp(1j * math.pi / 2), abs=1e-12)
    got1 = det_neg_i_inv_sqrt(np.eye(1))
    assert got1 == pytest.approx(np.exp(1j * math.pi / 4), abs=1e-12)


def test_fresnel_closed_form_matches_rule():
    eps, sigma = 1e-3, 30.0
    exact = math.sqrt(2 * math.pi) * (1 / sigma**2 - 1j / eps) ** -0.5
    lead = stationary_phase_leading(np.array([[1.0 + 0j]]), eps, 1.0)
    assert abs(exact / lead - 1.0) <= 1e-6


def test_oracle_complex_phase_k1():
    ph = SyntheticPhase(quadratic=np.array([[1.0 + 1.0j]]))
    rows = synthetic_oscillatory_oracle(1, ph, SyntheticAmplitude(sigma=5.0),
                                        [1e-3])
    assert abs(rows[0]["ratio"] - 1.0) <= 1e-4


def test_oracle_linear_eps_scaling():
    M = np.array([[1.2 + 1.0j, 0.3], [0.3, 0.9 + 1.1j]])
    ph = SyntheticPhase(quadratic=M, quartic=0.05)
    rows = synthetic_oscillatory_oracle(2, ph, SyntheticAmplitude(sigma=6.0),
                                        [1e-2, 1e-3, 1e-4])
    errs = np.array([abs(r["ratio"] - 1.0) for r in rows])
    eps = np.array([r["eps"] for r in rows])
    slope = np.polyfit(np.log(eps), np.log(errs), 1)[0]
    assert 0.8 <= slope <= 1.2


def test_brute_force_requires_decay():
    with pytest.raises(ValueError):
        brute_force_oscillatory(SyntheticPhase(quadratic=np.array([[1.0 + 0j]])),
                                SyntheticAmplitude(), 1e-3)
