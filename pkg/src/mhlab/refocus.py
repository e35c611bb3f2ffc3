"""Classification of zero-energy rays launched from the origin.

Rays split into three kinds: Returning (radial rays inside the aperture
cone, reflected straight back through the origin at the common time T_R),
Deflected (aperture-edge launches picking up a nonzero orthoradial kick),
and Straight (launches outside twice the aperture, which never meet the
bump).  Return time and action carry independent quadrature oracles from
the radial turning-point reduction.

Boundary launches at exactly theta_1 = theta0 and 2 theta0 classify as
Returning and Straight respectively (the angular profile is flat there,
so the radial / straight analysis applies verbatim).
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, quad, solve_ivp
from scipy.optimize import brentq

from .coords import from_hyperspherical
from .dynamics import PhasePoint, flow
from .errors import QuadratureFailure, RootNotBracketed, StepFailure
from .index import (IndexParams, angular_profile_d1, grad_n2_batch, n2_radial,
                    radial_profile, require_admissible)

RETURN_DISTANCE_THRESHOLD = 1e-6


class RayKind(enum.Enum):
    RETURNING = "returning"
    DEFLECTED = "deflected"
    STRAIGHT = "straight"


@dataclass
class RayVerdict:
    kind: RayKind
    theta1_launch: float
    t_r: float = None
    action: float = None
    min_distance_after_entry: float = None
    reversal_error: float = None
    entry_time: float = None
    exit_time: float = None
    diagnostics: dict = field(default_factory=dict)


def turning_radius(params: IndexParams) -> float:
    """Radius r* in (R-1, R-1/2) where the on-axis index vanishes."""
    require_admissible(params)
    R = params.R
    lo, hi = R - 1.0, R - 0.5
    flo, fhi = float(n2_radial(params, lo)), float(n2_radial(params, hi))
    if not (flo > 0.0 > fhi):
        raise RootNotBracketed("n^2(r) does not change sign on (R-1, R-1/2)")
    return float(brentq(lambda r: float(n2_radial(params, r)), lo, hi, xtol=1e-13))


def return_time_oracle(params: IndexParams) -> float:
    """T_R by turning-point quadrature: 2 * int_0^{r*} dr / sqrt(2 n^2(r)).

    The inverse-square-root singularity at r* is removed by r = r* - s^2.
    """
    require_admissible(params)
    r_star = turning_radius(params)
    v0 = params.zero_energy_speed
    free = (params.R - 1.0) / v0

    def integrand(s):
        val = 2.0 * float(n2_radial(params, r_star - s * s))
        return 2.0 * s / math.sqrt(max(val, 0.0)) if val > 0.0 else 0.0

    s_max = math.sqrt(r_star - (params.R - 1.0))
    bump, err = quad(integrand, 0.0, s_max, epsabs=1e-13, epsrel=1e-12, limit=400)
    if err > 1e-9:
        raise QuadratureFailure(f"return-time quadrature error estimate {err:.2e}")
    return 2.0 * (free + bump)


def radial_action_oracle(params: IndexParams) -> float:
    """Action oracle 2 sqrt(2) * int_0^{r*} n(r) dr on the radial ray."""
    require_admissible(params)
    r_star = turning_radius(params)
    n_inf = math.sqrt(params.n_inf_sq)
    free = (params.R - 1.0) * n_inf

    def integrand(s):
        val = float(n2_radial(params, r_star - s * s))
        return 2.0 * s * math.sqrt(max(val, 0.0))

    s_max = math.sqrt(r_star - (params.R - 1.0))
    bump, err = quad(integrand, 0.0, s_max, epsabs=1e-13, epsrel=1e-12, limit=400)
    if err > 1e-9:
        raise QuadratureFailure(f"action quadrature error estimate {err:.2e}")
    return 2.0 * math.sqrt(2.0) * (free + bump)


# ----------------------------------------------------------------------
# batched integration of (x, xi, action) along rays
# ----------------------------------------------------------------------

def _ray_batch_solve(params: IndexParams, dirs: np.ndarray, T: float, tol: float):
    """Stacked solve of (x, xi, S) for zero-energy launches along dirs."""
    from .index import n2_rtheta

    B, d = dirs.shape
    w = 2 * d + 1
    v0 = params.zero_energy_speed
    y0 = np.zeros(B * w)
    Y0 = y0.reshape(B, w)
    Y0[:, d:2 * d] = v0 * dirs

    def rhs(t, y):
        Y = y.reshape(B, w)
        X = Y[:, :d]
        XI = Y[:, d:2 * d]
        out = np.empty_like(Y)
        out[:, :d] = XI
        out[:, d:2 * d] = grad_n2_batch(params, X)
        r = np.linalg.norm(X, axis=1)
        rho = X[:, 1] if d == 2 else np.linalg.norm(X[:, 1:], axis=1)
        th = np.arctan2(rho, X[:, 0])
        out[:, 2 * d] = 0.5 * np.einsum("bi,bi->b", XI, XI) + n2_rtheta(params, r, th)
        return out.ravel()

    from .dynamics import bump_safe_max_step
    sol = solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=tol,
                    atol=tol * 1e-2, dense_output=True,
                    max_step=bump_safe_max_step(params, v0))
    if sol.status == -1:
        raise StepFailure(f"batched ray solve failed: {sol.message}")
    return sol


def _classify_batch(params: IndexParams, dirs: np.ndarray, tol: float = 1e-10,
                    n_dense: int = 3600) -> list:
    """Verdicts for a batch of unit launch directions (straight ones excluded)."""
    from .index import n2_rtheta

    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    B, d = dirs.shape
    v0 = params.zero_energy_speed
    t_entry = (params.R - 1.0) / v0
    T_max = max(12.0, 5.0 * (params.R + 1.0) / v0)
    sol = _ray_batch_solve(params, dirs, T_max, tol)
    w = 2 * d + 1

    ts = np.linspace(0.0, T_max, n_dense)
    Y = sol.sol(ts).reshape(B, w, n_dense)
    X = Y[:, :d, :]
    dist = np.linalg.norm(X, axis=1)           # (B, n_dense)
    after = ts >= t_entry

    verdicts = []
    for i in range(B):
        di = dist[i, after]
        t_after = ts[after]
        k = int(np.argmin(di))
        t_k = float(t_after[k])
        y_k = sol.sol(t_k).reshape(B, w)[i]
        x_k, xi_k = y_k[:d], y_k[d:2 * d]
        r_k = float(np.linalg.norm(x_k))
        # refine on the locally affine segment (the near-origin pass is in
        # the force-free core r < R - 1)
        if r_k < params.R - 1.0 or r_k > params.R + 1.0:
            v2 = float(xi_k @ xi_k)
            t_star = t_k - float(x_k @ xi_k) / v2
            t_star = min(max(t_star, t_k - 0.5), t_k + 0.5)
            y_s = sol.sol(t_star).reshape(B, w)[i]
            x_s, xi_s = y_s[:d], y_s[d:2 * d]
            d_star = float(np.linalg.norm(x_s))
        else:
            t_star, d_star = t_k, float(di[k])
            x_s, xi_s = x_k, xi_k
        d_star = min(d_star, float(di[k]))

        theta1 = math.atan2(np.linalg.norm(dirs[i, 1:]) if d == 3 else dirs[i, 1], dirs[i, 0])
        xi0 = v0 * dirs[i]
        state_T = sol.sol(T_max).reshape(B, w)[i]
        outgoing = float(state_T[:d] @ state_T[d:2 * d])
        diag = {"final_radius": float(np.linalg.norm(state_T[:d])),
                "final_outgoing": outgoing > 0.0}

        if d_star < RETURN_DISTANCE_THRESHOLD:
            y_r = sol.sol(t_star).reshape(B, w)[i]
            action = float(y_r[2 * d])
            rev = float(np.linalg.norm(y_r[d:2 * d] + xi0))
            verdicts.append(RayVerdict(kind=RayKind.RETURNING, theta1_launch=theta1,
                                       t_r=float(t_star), action=action,
                                       reversal_error=rev, entry_time=t_entry,
                                       diagnostics=diag))
        else:
            verdicts.append(RayVerdict(kind=RayKind.DEFLECTED, theta1_launch=theta1,
                                       min_distance_after_entry=float(d_star),
                                       entry_time=t_entry, diagnostics=diag))
    return verdicts


def classify_ray(params: IndexParams, direction, tol: float = 1e-11) -> RayVerdict:
    """Classify one zero-energy launch direction."""
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    d = params.d
    theta1 = math.atan2(np.linalg.norm(direction[1:]) if d == 3 else direction[1],
                        direction[0])
    if abs(theta1) >= 2.0 * params.theta0:
        return RayVerdict(kind=RayKind.STRAIGHT, theta1_launch=theta1,
                          diagnostics={"analytic": "launch cone misses the bump"})
    return _classify_batch(params, direction[None, :], tol=tol)[0]


def action_integral(params: IndexParams, direction, tol: float = 1e-11) -> float:
    """Running action int (|Xi|^2/2 + n^2(X)) ds up to the return time."""
    verdict = classify_ray(params, direction, tol=tol)
    if verdict.kind is not RayKind.RETURNING:
        raise ValueError(f"direction is {verdict.kind.value}, not returning")
    return verdict.action


@dataclass
class OrthoradialReport:
    min_theta1_rate: float
    max_identity_residual: float
    transit: tuple


def orthoradial_monotonicity(params: IndexParams, direction,
                             tol: float = 1e-11) -> OrthoradialReport:
    """Angular speed along a deflected transit, computed two ways.

    The direct value is theta_1'(t) = (u_theta . Xi)/r along the dense
    trajectory; the integral identity divides the accumulated orthoradial
    impulse -lambda int f(r) g'(theta_1) ds by r^2(t).  The minimum of the
    direct value is taken over [t_e + 2% of the transit, t_s]: closer to
    entry the force is below the resolution of the flat cutoff contact and
    the sign carries no information.
    """
    direction = np.asarray(direction, dtype=float)
    d = params.d
    theta1 = math.atan2(np.linalg.norm(direction[1:]) if d == 3 else direction[1],
                        direction[0])
    if not params.theta0 < abs(theta1) < 2.0 * params.theta0:
        raise ValueError("orthoradial monotonicity needs a deflected launch")
    from .dynamics import zero_energy_launch
    p0 = zero_energy_launch(params, direction)
    traj = flow(params, p0, max(12.0, 5.0 * (params.R + 1.0) / params.zero_energy_speed),
                tol=tol)
    t_e = (params.R - 1.0) / params.zero_energy_speed
    exits = [e.time for e in traj.events if e.time > t_e * 1.0001
             and (e.kind in ("r_inner", "r_outer", "cone"))]
    if not exits:
        raise StepFailure("no bump exit event found")
    t_s = min(exits)

    ts = np.linspace(t_e, t_s, 4001)
    states = traj.states(ts)
    X = states[:, :d]
    XI = states[:, d:2 * d]
    r = np.linalg.norm(X, axis=1)
    rho = X[:, 1] if d == 2 else np.linalg.norm(X[:, 1:], axis=1)
    th = np.arctan2(rho, X[:, 0])
    s, c = np.sin(th), np.cos(th)
    rho_safe = np.where(np.abs(rho) > 0, rho, 1.0)
    u_theta = np.empty_like(X)
    u_theta[:, 0] = -s
    u_theta[:, 1:] = c[:, None] * (X[:, 1:] / rho_safe[:, None])
    rate_direct = np.einsum("bi,bi->b", u_theta, XI) / r

    integrand = radial_profile(params, r) * angular_profile_d1(params, th)
    impulse = cumulative_simpson(integrand, x=ts, initial=0.0)
    rate_identity = -params.lam * impulse / r**2

    lo = int(0.02 * len(ts))
    return OrthoradialReport(
        min_theta1_rate=float(np.min(rate_direct[lo:])),
        max_identity_residual=float(np.max(np.abs(rate_direct - rate_identity))),
        transit=(float(t_e), float(t_s)))


# ----------------------------------------------------------------------
# cap scan
# ----------------------------------------------------------------------

@dataclass
class CapScan:
    theta1: np.ndarray
    theta2: np.ndarray
    kinds: list
    t_r: np.ndarray
    action: np.ndarray
    min_distance: np.ndarray
    refined_cell: float
    cap_edge: float
    first_deflected: float
    t_r_spread: float
    action_spread: float
    n_samples: int

    def summary(self) -> dict:
        counts = {k.value: sum(1 for kk in self.kinds if kk is k) for k in RayKind}
        return {
            "n_samples": self.n_samples,
            "counts": counts,
            "cap_edge": self.cap_edge,
            "first_deflected": self.first_deflected,
            "refined_cell": self.refined_cell,
            "t_r_relative_spread": self.t_r_spread,
            "action_relative_spread": self.action_spread,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["theta1", "theta2", "verdict", "t_r", "action", "min_distance"])
            for i in range(len(self.kinds)):
                wr.writerow([f"{self.theta1[i]:.12g}", f"{self.theta2[i]:.12g}",
                             self.kinds[i].value,
                             "" if np.isnan(self.t_r[i]) else f"{self.t_r[i]:.12g}",
                             "" if np.isnan(self.action[i]) else f"{self.action[i]:.12g}",
                             "" if np.isnan(self.min_distance[i]) else f"{self.min_distance[i]:.12g}"])


def _scan_theta_grid(params: IndexParams, n_theta: int, refined_cell: float):
    """Polar-angle samples: coarse over the full range, refined near theta0."""
    th0 = params.theta0
    band = np.arange(-10, 11) * refined_cell + th0
    hi = math.pi if params.d == 3 else math.pi
    coarse = np.linspace(0.0, hi, max(8, n_theta - band.size))
    vals = np.unique(np.concatenate([coarse, band]))
    return vals[(vals >= 0.0) & (vals <= hi)]


def cap_scan(params: IndexParams, n_samples: int = 10_000, seed: int = 0,
             tol: float = 1e-10, refined_cell: float = 0.01,
             batch: int = 256) -> CapScan:
    """Scan launch directions and map the returning cap.

    The polar grid is refined to `refined_cell` near theta0; that cell is
    also the resolution at which the cap edge is asserted, matched to the
    exponentially flat contact of the cutoff at the aperture (launches
    just outside theta0 deflect by less than any fixed return threshold).
    """
    require_admissible(params)
    if n_samples < 1000:
        raise ValueError("scan needs at least 1e3 samples")
    d = params.d
    n_az = max(1, int(round(n_samples / 100))) if d == 3 else 1
    n_theta = max(2, int(math.ceil(n_samples / n_az)))
    thetas = _scan_theta_grid(params, n_theta, refined_cell)
    if d == 3:
        azimuths = np.linspace(0.0, 2.0 * math.pi, n_az, endpoint=False)
        TH, AZ = np.meshgrid(thetas, azimuths, indexing="ij")
        th_flat, az_flat = TH.ravel(), AZ.ravel()
        dirs = np.column_stack([np.cos(th_flat),
                                np.sin(th_flat) * np.cos(az_flat),
                                np.sin(th_flat) * np.sin(az_flat)])
    else:
        signed = np.unique(np.concatenate([thetas, -thetas]))
        th_flat = signed
        az_flat = np.zeros_like(signed)
        dirs = np.column_stack([np.cos(signed), np.sin(signed)])

    n_total = dirs.shape[0]
    kinds = [None] * n_total
    t_r = np.full(n_total, np.nan)
    action = np.full(n_total, np.nan)
    min_distance = np.full(n_total, np.nan)

    needs_ode = np.abs(th_flat) < 2.0 * params.theta0
    for i in np.nonzero(~needs_ode)[0]:
        kinds[i] = RayKind.STRAIGHT
    idx = np.nonzero(needs_ode)[0]
    for start in range(0, idx.size, batch):
        sel = idx[start:start + batch]
        verdicts = _classify_batch(params, dirs[sel], tol=tol)
        for j, v in zip(sel, verdicts):
            kinds[j] = v.kind
            if v.kind is RayKind.RETURNING:
                t_r[j] = v.t_r
                action[j] = v.action
                min_distance[j] = 0.0
            else:
                min_distance[j] = v.min_distance_after_entry

    abs_th = np.abs(th_flat)
    returning = np.array([k is RayKind.RETURNING for k in kinds])
    deflected = np.array([k is RayKind.DEFLECTED for k in kinds])
    cap_edge = float(np.max(abs_th[returning])) if returning.any() else np.nan
    first_deflected = float(np.min(abs_th[deflected])) if deflected.any() else np.nan

    tr_vals = t_r[returning]
    ac_vals = action[returning]
    tr_spread = float(np.max(tr_vals) / np.min(tr_vals) - 1.0) if tr_vals.size else np.nan
    ac_spread = float(np.max(ac_vals) / np.min(ac_vals) - 1.0) if ac_vals.size else np.nan

    return CapScan(theta1=th_flat, theta2=az_flat, kinds=kinds, t_r=t_r,
                   action=action, min_distance=min_distance,
                   refined_cell=refined_cell, cap_edge=cap_edge,
                   first_deflected=first_deflected, t_r_spread=tr_spread,
                   action_spread=ac_spread, n_samples=n_total)
