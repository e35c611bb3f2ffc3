import math

import numpy as np
import pytest

from mhlab.dynamics import PhasePoint, flow
from mhlab.index import DEFAULT_PARAMS, IndexParams
from mhlab.linearized import (VariationalBatch, det_branch_inv_sqrt, gamma,
                              rotation_conjugation_check, variational)
from mhlab.refocus import classify_ray

P = DEFAULT_PARAMS
SPEED = math.sqrt(2.0)


@pytest.fixture(scope="module")
def axis_path():
    p0 = PhasePoint(np.zeros(3), np.array([SPEED, 0.0, 0.0]))
    return variational(P, p0, 4.0, tol=1e-12)


@pytest.fixture(scope="module")
def t_return():
    return classify_ray(P, np.array([1.0, 0.0, 0.0]), tol=1e-12).t_r


def test_initial_blocks(axis_path):
    _, _, A, B, C, D, S = axis_path.blocks(0.0)
    assert np.allclose(A, np.eye(3), atol=1e-14)
    assert np.allclose(D, np.eye(3), atol=1e-14)
    assert np.allclose(B, 0.0, atol=1e-14)
    assert np.allclose(C, 0.0, atol=1e-14)
    assert S == pytest.approx(0.0, abs=1e-14)


def test_free_blocks_closed_form():
    Pfree = IndexParams(lam=0.0)
    p0 = PhasePoint(np.array([0.1, 0.0, -0.2]), np.array([0.3, 1.0, 0.0]))
    path = variational(Pfree, p0, 3.0, tol=1e-12)
    for t in (0.5, 1.7, 3.0):
        _, _, A, B, C, D, _ = path.blocks(t)
        assert np.allclose(A, np.eye(3), atol=1e-10)
        assert np.allclose(B, t * np.eye(3), atol=1e-10)
        assert np.allclose(C, 0.0, atol=1e-10)
        assert np.allclose(D, np.eye(3), atol=1e-10)
        st = path.state(t)
        G = gamma(st)
        assert np.allclose(G, 1j / (1 + 1j * t) * np.eye(3), atol=1e-10)


def test_free_branch_closed_form_d2():
    Pfree = IndexParams(lam=0.0, d=2)
    p0 = PhasePoint(np.zeros(2), np.array([1.0, 0.0]))
    path = variational(Pfree, p0, 2.5, tol=1e-12)
    for t in (0.3, 1.2, 2.5):
        st = path.state(t)
        val = det_branch_inv_sqrt(st)
        assert val == pytest.approx(1.0 / (1.0 + 1j * t), abs=1e-9)
    assert det_branch_inv_sqrt(path.state(0.0)) == pytest.approx(1.0, abs=1e-12)


def test_return_time_blocks(axis_path, t_return):
    _, _, A, B, C, D, _ = axis_path.blocks(t_return)
    assert np.max(np.abs(D + np.eye(3))) <= 1e-5
    assert np.max(np.abs(B[:, 1:])) <= 1e-5


def test_columns_match_flow_differences(axis_path, t_return):
    h = 1e-5
    p_base = np.array([SPEED, 0.0, 0.0])
    _, _, A, B, C, D, _ = axis_path.blocks(t_return)
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = h
        plus = flow(P, PhasePoint(np.zeros(3), p_base + dp), t_return,
                    tol=1e-11, record_events=False).point(t_return)
        minus = flow(P, PhasePoint(np.zeros(3), p_base - dp), t_return,
                     tol=1e-11, record_events=False).point(t_return)
        col_B = (plus.x - minus.x) / (2 * h)
        col_D = (plus.xi - minus.xi) / (2 * h)
        assert np.max(np.abs(B[:, j] - col_B)) <= 1e-5
        assert np.max(np.abs(D[:, j] - col_D)) <= 1e-5


def test_gamma_symmetric_positive(axis_path):
    for t in (0.4, 1.6, 2.4, 3.3):
        G = axis_path.gamma_at(t)
        assert np.max(np.abs(G - G.T)) <= 1e-8
        eigs = np.linalg.eigvalsh(0.5 * (G.imag + G.imag.T))
        assert np.min(eigs) > 0.0


def test_branch_refinement_stability():
    p0 = PhasePoint(np.zeros(3), np.array([SPEED, 0.0, 0.0]))
    a = variational(P, p0, 4.0, tol=1e-11)
    b = variational(P, p0, 4.0, tol=1e-12)
    for t in (1.0, 2.0, 3.0, 3.9):
        assert a.branch_arg(t) == pytest.approx(b.branch_arg(t), abs=1e-8)


def test_branch_start_value(axis_path):
    assert det_branch_inv_sqrt(axis_path.state(0.0)) == pytest.approx(1.0, abs=1e-13)


def test_rotation_conjugation():
    t_r = classify_ray(P, np.array([1.0, 0.0, 0.0]), tol=1e-12).t_r
    p0 = SPEED * np.array([1.0, 0.0, 0.0])
    assert rotation_conjugation_check(P, p0, t_r, tol=1e-12) <= 1e-9
    th = 0.5 * P.theta0
    p = SPEED * np.array([math.cos(th), math.sin(th) * math.cos(1.1),
                          math.sin(th) * math.sin(1.1)])
    assert rotation_conjugation_check(P, p, t_r, tol=1e-12) <= 1e-6
    assert rotation_conjugation_check(P, p, 0.5 * t_r, tol=1e-12) <= 1e-6


def test_batch_matches_single():
    th = 0.3 * P.theta0
    dirs = np.array([[1.0, 0.0, 0.0],
                     [math.cos(th), math.sin(th), 0.0]])
    qs = np.zeros((2, 3))
    ps = SPEED * dirs
    batch = VariationalBatch(P, qs, ps, 3.0, tol=1e-11)
    for i in range(2):
        single = variational(P, PhasePoint(qs[i], ps[i]), 3.0, tol=1e-12)
        for t in (1.0, 2.5):
            xb, xib, Ab, Bb, Cb, Db, Sb = batch.member_state(i, t)
            xs, xis, As, Bs, Cs, Ds, Ss = single.blocks(t)
            assert np.max(np.abs(Ab - As)) <= 1e-8
            assert np.max(np.abs(Bb - Bs)) <= 1e-8
            assert np.max(np.abs(xb - xs)) <= 1e-9
            assert Sb == pytest.approx(Ss, abs=1e-9)
    assert batch.energy_drift() <= 1e-8


def test_path_export(axis_path):
    import json
    recs = json.loads(axis_path.to_json_records([0.0, 1.0]))
    assert len(recs) == 2
    assert set(recs[0]) == {"t", "A", "B", "C", "D", "branch_arg"}
