"""Linearized (variational) flow along rays.

The Jacobian blocks A = DX/Dx, B = DX/Dxi, C = DXi/Dx, D = DXi/Dxi are
co-integrated with the base ray in one extended state vector, together
with the running action integral of |Xi|^2/2 + n^2(X).  The complex
matrix Gamma = (C + iD)(A + iB)^{-1} and a continuously tracked branch
of det(A + iB)^{-1/2} are derived from the path.

Note the initial data: B(0) = 0 and D(0) = Id, as forced by the
definitions B = DX/Dxi, D = DXi/Dxi (free flight gives B = t Id, D = Id,
and det(A(0) + iB(0)) = 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .coords import rotation_to_axis
from .dynamics import PhasePoint
from .errors import DegenerateDeterminant, StepFailure
from .index import IndexParams, grad_n2, hess_n2, n2

_DET_FLOOR = 1e-12


@dataclass(frozen=True)
class VariationalState:
    """Snapshot of the linearized flow at one time."""

    t: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    branch_arg: float

    def det_ab(self) -> complex:
        return complex(np.linalg.det(self.A + 1j * self.B))


def _pack(d, x, xi, A, B, C, D, S):
    return np.concatenate([x, xi, A.ravel(), B.ravel(), C.ravel(), D.ravel(), [S]])


def _unpack(d, y):
    n = d * d
    x = y[:d]
    xi = y[d:2 * d]
    o = 2 * d
    A = y[o:o + n].reshape(d, d)
    B = y[o + n:o + 2 * n].reshape(d, d)
    C = y[o + 2 * n:o + 3 * n].reshape(d, d)
    D = y[o + 3 * n:o + 4 * n].reshape(d, d)
    S = y[o + 4 * n]
    return x, xi, A, B, C, D, S


def _variational_rhs(params: IndexParams, d: int):
    def rhs(t, y):
        x, xi, A, B, C, D, _ = _unpack(d, y)
        H = hess_n2(params, x)
        return _pack(d, xi, grad_n2(params, x), C, D, H @ A, H @ B,
                     0.5 * float(xi @ xi) + n2(params, x))
    return rhs


class VariationalPath:
    """Base ray plus Jacobian blocks with dense output over [0, T]."""

    def __init__(self, params: IndexParams, p0: PhasePoint, T: float,
                 tol: float = 1e-11, method: str = "DOP853"):
        if tol <= 0.0:
            raise ValueError("tol must be positive")
        self.params = params
        self.d = d = params.d
        eye = np.eye(d)
        y0 = _pack(d, np.asarray(p0.x, float), np.asarray(p0.xi, float),
                   eye, np.zeros((d, d)), np.zeros((d, d)), eye, 0.0)
        from .dynamics import bump_safe_max_step
        max_step = bump_safe_max_step(params, np.linalg.norm(p0.xi))
        sol = solve_ivp(_variational_rhs(params, d), (0.0, T), y0,
                        method=method, rtol=tol, atol=tol * 1e-2,
                        dense_output=True, max_step=max_step)
        if sol.status == -1:
            raise StepFailure(f"variational step controller failed: {sol.message}")
        self.sol = sol
        self.T = T
        self.tol = tol
        self._branch_ts, self._branch_args = self._build_branch_grid()

    # -- raw access ----------------------------------------------------
    def blocks(self, t: float):
        x, xi, A, B, C, D, S = _unpack(self.d, self.sol.sol(t))
        return x, xi, A, B, C, D, S

    def flow_point(self, t: float) -> PhasePoint:
        y = self.sol.sol(t)
        return PhasePoint(y[:self.d], y[self.d:2 * self.d])

    def action(self, t: float) -> float:
        return float(self.sol.sol(t)[-1])

    def det_ab(self, t: float) -> complex:
        _, _, A, B, _, _, _ = self.blocks(t)
        return complex(np.linalg.det(A + 1j * B))

    # -- branch tracking -------------------------------------------------
    def _build_branch_grid(self):
        ts = list(np.asarray(self.sol.t, dtype=float))
        args_raw = [np.angle(self.det_ab(t)) for t in ts]
        # insert midpoints until adjacent raw-phase jumps are below pi/4
        i = 0
        guard = 0
        while i < len(ts) - 1:
            dphi = _principal(args_raw[i + 1] - args_raw[i])
            if abs(dphi) >= math.pi / 4 and abs(ts[i + 1] - ts[i]) > 1e-13:
                tm = 0.5 * (ts[i] + ts[i + 1])
                ts.insert(i + 1, tm)
                args_raw.insert(i + 1, np.angle(self.det_ab(tm)))
                guard += 1
                if guard > 200000:
                    raise DegenerateDeterminant("branch refinement did not converge")
            else:
                i += 1
        args = [0.0]
        for i in range(1, len(ts)):
            args.append(args[-1] + _principal(args_raw[i] - args_raw[i - 1]))
        # pin the accumulated argument to start at the t=0 value (= 0)
        offset = args_raw[0]
        return np.array(ts), np.array(args) + offset

    def branch_arg(self, t: float) -> float:
        """Continuously accumulated argument of det(A + iB) at time t."""
        det = self.det_ab(t)
        if abs(det) < _DET_FLOOR:
            raise DegenerateDeterminant(f"|det(A+iB)| = {abs(det):.3e} at t = {t}")
        ts, args = self._branch_ts, self._branch_args
        t = float(t)
        k = int(np.searchsorted(ts, t, side="right") - 1)
        k = min(max(k, 0), len(ts) - 1)
        cur_t, cur_arg = float(ts[k]), float(args[k])
        # walk from the grid node to t, halving the stride on large jumps
        for _ in range(256):
            if cur_t == t:
                return cur_arg
            step = t - cur_t
            for _ in range(64):
                nxt = cur_t + step
                d = _principal(np.angle(self.det_ab(nxt)) - cur_arg)
                if abs(d) < math.pi / 2:
                    break
                step *= 0.5
                if abs(step) < 1e-14:
                    raise DegenerateDeterminant("could not continue the determinant branch")
            cur_t, cur_arg = nxt, cur_arg + d
        raise DegenerateDeterminant("branch continuation exceeded iteration budget")

    def state(self, t: float) -> VariationalState:
        _, _, A, B, C, D, _ = self.blocks(t)
        return VariationalState(t=float(t), A=A, B=B, C=C, D=D,
                                branch_arg=self.branch_arg(t))

    def gamma_at(self, t: float) -> np.ndarray:
        return gamma(self.state(t))

    def det_branch_inv_sqrt_at(self, t: float) -> complex:
        return det_branch_inv_sqrt(self.state(t))

    def to_json_records(self, ts) -> str:
        recs = []
        for t in np.asarray(ts, dtype=float):
            st = self.state(t)
            recs.append({"t": float(t),
                         "A": st.A.tolist(), "B": st.B.tolist(),
                         "C": st.C.tolist(), "D": st.D.tolist(),
                         "branch_arg": st.branch_arg})
        return json.dumps(recs, sort_keys=True)


def _principal(phi: float) -> float:
    """Wrap an angle difference into (-pi, pi]."""
    return float((phi + math.pi) % (2.0 * math.pi) - math.pi)


class VariationalBatch:
    """Many variational paths integrated as one stacked adaptive solve.

    All members share the step sequence (the error norm is taken over the
    stacked state), which is the right trade for large families of nearby
    initial conditions: the vectorized right-hand side makes the whole
    batch cost roughly one path.  Per-member energy drift is reported so
    callers can verify the shared control did not starve any member.
    """

    def __init__(self, params: IndexParams, x0s: np.ndarray, xi0s: np.ndarray,
                 T: float, tol: float = 1e-11, method: str = "DOP853"):
        from .index import grad_n2_batch, hess_n2_batch, n2_rtheta
        from .coords import axis_angle

        self.params = params
        x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
        xi0s = np.atleast_2d(np.asarray(xi0s, dtype=float))
        B, d = x0s.shape
        self.B, self.d = B, d
        n = d * d
        self._w = w = 2 * d + 4 * n + 1
        y0 = np.zeros(B * w)
        Y0 = y0.reshape(B, w)
        Y0[:, :d] = x0s
        Y0[:, d:2 * d] = xi0s
        eye = np.eye(d).ravel()
        Y0[:, 2 * d:2 * d + n] = eye          # A
        Y0[:, 2 * d + 3 * n:2 * d + 4 * n] = eye  # D

        lam = params.lam

        def rhs(t, y):
            Y = y.reshape(B, w)
            X = Y[:, :d]
            XI = Y[:, d:2 * d]
            A = Y[:, 2 * d:2 * d + n].reshape(B, d, d)
            Bm = Y[:, 2 * d + n:2 * d + 2 * n].reshape(B, d, d)
            C = Y[:, 2 * d + 2 * n:2 * d + 3 * n].reshape(B, d, d)
            D = Y[:, 2 * d + 3 * n:2 * d + 4 * n].reshape(B, d, d)
            out = np.empty_like(Y)
            out[:, :d] = XI
            out[:, d:2 * d] = grad_n2_batch(params, X)
            out[:, 2 * d:2 * d + n] = C.reshape(B, n)
            out[:, 2 * d + n:2 * d + 2 * n] = D.reshape(B, n)
            H = hess_n2_batch(params, X)
            out[:, 2 * d + 2 * n:2 * d + 3 * n] = np.einsum("bij,bjk->bik", H, A).reshape(B, n)
            out[:, 2 * d + 3 * n:2 * d + 4 * n] = np.einsum("bij,bjk->bik", H, Bm).reshape(B, n)
            r = np.linalg.norm(X, axis=1)
            th = axis_angle(X) if d == 2 else np.arctan2(np.linalg.norm(X[:, 1:], axis=1), X[:, 0])
            out[:, -1] = 0.5 * np.einsum("bi,bi->b", XI, XI) + n2_rtheta(params, r, th)
            return out.ravel()

        from .dynamics import bump_safe_max_step
        max_step = bump_safe_max_step(params, float(np.max(np.linalg.norm(xi0s, axis=1))))
        sol = solve_ivp(rhs, (0.0, T), y0, method=method, rtol=tol,
                        atol=tol * 1e-2, dense_output=True, max_step=max_step)
        if sol.status == -1:
            raise StepFailure(f"batched variational solve failed: {sol.message}")
        self.sol = sol
        self.tol = tol
        self.T = T

    def member_state(self, i: int, t: float):
        """(x, xi, A, B, C, D, S) of member i at time t."""
        y = self.sol.sol(t).reshape(self.B, self._w)[i]
        return _unpack(self.d, y)

    def states_at(self, t: float):
        """All member states at time t, shape (B, w)."""
        return self.sol.sol(t).reshape(self.B, self._w)

    def energy_drift(self, n_check: int = 33) -> float:
        """Max |h(t) - h(0)| over members on a coarse check grid."""
        from .index import n2_rtheta
        ts = np.linspace(0.0, self.T, n_check)
        d = self.d
        drift = 0.0
        h0 = None
        for t in ts:
            Y = self.states_at(t)
            X, XI = Y[:, :d], Y[:, d:2 * d]
            r = np.linalg.norm(X, axis=1)
            th = np.arctan2(X[:, 1], X[:, 0]) if d == 2 else np.arctan2(
                np.linalg.norm(X[:, 1:], axis=1), X[:, 0])
            h = 0.5 * np.einsum("bi,bi->b", XI, XI) - n2_rtheta(self.params, r, th)
            if h0 is None:
                h0 = h
            else:
                drift = max(drift, float(np.max(np.abs(h - h0))))
        return drift


def variational(params: IndexParams, p0: PhasePoint, T: float,
                tol: float = 1e-11) -> VariationalPath:
    """Co-integrate the ray and the matrix blocks A, B, C, D from p0."""
    return VariationalPath(params, p0, T, tol=tol)


def gamma(state: VariationalState) -> np.ndarray:
    """Gamma = (C + iD) (A + iB)^{-1}."""
    M = state.A + 1j * state.B
    if abs(np.linalg.det(M)) < _DET_FLOOR:
        raise DegenerateDeterminant("det(A + iB) below invertibility floor")
    return np.linalg.solve(M.T, (state.C + 1j * state.D).T).T


def det_branch_inv_sqrt(state: VariationalState) -> complex:
    """det(A + iB)^{-1/2} with the argument followed continuously from 1."""
    det = state.det_ab()
    if abs(det) < _DET_FLOOR:
        raise DegenerateDeterminant("det(A + iB) below invertibility floor")
    return abs(det) ** (-0.5) * np.exp(-0.5j * state.branch_arg)


def rotation_conjugation_check(params: IndexParams, p, t: float,
                               tol: float = 1e-11) -> float:
    """Residual of the conjugation identity for the B and D blocks.

    For a zero-energy momentum p inside the aperture cone and R_p the
    rotation taking p to the axis momentum p0, returns
    ||R_p B_t(0,p) R_p^{-1} - B_t(0,p0)|| + ||R_p D_t(0,p) R_p^{-1} - D_t(0,p0)||
    in the operator 2-norm.
    """
    p = np.asarray(p, dtype=float)
    d = params.d
    origin = np.zeros(d)
    p0 = np.zeros(d)
    p0[0] = np.linalg.norm(p)
    Rp = rotation_to_axis(p)
    horizon = max(1.05 * t, 1e-6) if t >= 0 else t - 0.1
    path_p = variational(params, PhasePoint(origin, p), horizon, tol=tol)
    path_0 = variational(params, PhasePoint(origin, p0), horizon, tol=tol)
    _, _, _, Bp, _, Dp, _ = path_p.blocks(t)
    _, _, _, B0, _, D0, _ = path_0.blocks(t)
    res_b = np.linalg.norm(Rp @ Bp @ Rp.T - B0, ord=2)
    res_d = np.linalg.norm(Rp @ Dp @ Rp.T - D0, ord=2)
    return float(res_b + res_d)
