"""The circular-mirror refraction index and its derivatives.

The index is n^2(x) = n_inf^2 - lambda * f(r) * g(theta_1) with
f(r) = chi(2 (r - R)) and g(theta_1) = chi(theta_1 / theta_0): a smooth
annular bump of depth lambda centred on the sphere r = R, restricted to
the cone of half-angle ~2 theta_0 about the +e1 axis.  Admissible
parameters have lambda > n_inf^2 (so a classically forbidden pocket
exists) and satisfy the smallness condition 1 - cos(2 theta_0) < 1/(2R).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .coords import chi, chi_prime, chi_second


@dataclass(frozen=True)
class IndexParams:
    """Mirror configuration; the single source of truth for n^2."""

    n_inf_sq: float = 1.0
    lam: float = 2.0
    R: float = 3.0
    theta0: float = 0.25
    d: int = 3

    @property
    def n0_sq(self) -> float:
        """n^2 at the origin (equals n_inf^2 because the bump excludes 0)."""
        return self.n_inf_sq

    @property
    def zero_energy_speed(self) -> float:
        """|xi| for zero-energy launches from the origin: sqrt(2 n^2(0))."""
        return math.sqrt(2.0 * self.n0_sq)

    def to_json_dict(self) -> dict:
        return {
            "n_inf_sq": self.n_inf_sq,
            "lambda": self.lam,
            "R": self.R,
            "theta0": self.theta0,
            "d": self.d,
        }

    @classmethod
    def from_json_dict(cls, blob: dict) -> "IndexParams":
        known = {"n_inf_sq", "lambda", "R", "theta0", "d"}
        unknown = set(blob) - known
        if unknown:
            raise ValueError(f"unknown IndexParams keys: {sorted(unknown)}")
        kwargs = dict(blob)
        if "lambda" in kwargs:
            kwargs["lam"] = kwargs.pop("lambda")
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "IndexParams":
        return cls.from_json_dict(json.loads(text))


DEFAULT_PARAMS = IndexParams()


class RegionTag(enum.Enum):
    FORBIDDEN = "forbidden"
    BUMP = "bump"
    FREE = "free"


def radial_profile(params: IndexParams, r):
    """f(r) = chi(2 (r - R))."""
    return chi(2.0 * (np.asarray(r, dtype=float) - params.R))


def radial_profile_d1(params: IndexParams, r):
    return 2.0 * chi_prime(2.0 * (np.asarray(r, dtype=float) - params.R))


def radial_profile_d2(params: IndexParams, r):
    return 4.0 * chi_second(2.0 * (np.asarray(r, dtype=float) - params.R))


def angular_profile(params: IndexParams, theta1):
    """g(theta_1) = chi(theta_1 / theta_0)."""
    return chi(np.asarray(theta1, dtype=float) / params.theta0)


def angular_profile_d1(params: IndexParams, theta1):
    return chi_prime(np.asarray(theta1, dtype=float) / params.theta0) / params.theta0


def angular_profile_d2(params: IndexParams, theta1):
    return chi_second(np.asarray(theta1, dtype=float) / params.theta0) / params.theta0**2


def n2_rtheta(params: IndexParams, r, theta1):
    """n^2 as a function of (r, theta_1); vectorized."""
    return params.n_inf_sq - params.lam * radial_profile(params, r) * angular_profile(params, theta1)


def n2_radial(params: IndexParams, r):
    """On-axis profile n^2(r e1) = n_inf^2 - lambda f(r); vectorized."""
    return params.n_inf_sq - params.lam * radial_profile(params, r)


def _split(x):
    """(r, rho, x1) with rho = |x_perp| for d >= 3 and rho = x2 for d = 2."""
    x = np.asarray(x, dtype=float)
    if x.size == 2:
        rho = x[1]
    else:
        rho = float(np.linalg.norm(x[1:]))
    r = float(np.linalg.norm(x))
    return r, rho, float(x[0])


def n2(params: IndexParams, x) -> float:
    r, rho, x1 = _split(x)
    theta1 = math.atan2(rho, x1) if r > 0.0 else 0.0
    return float(n2_rtheta(params, r, theta1))


def grad_n2(params: IndexParams, x) -> np.ndarray:
    """Cartesian gradient, assembled from the radial/orthoradial closed form.

    Terms are skipped (not computed as 0 * singular factor) wherever their
    scalar prefactor vanishes, so the on-axis and near-origin cases are
    free of 0/0 artifacts.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    r, rho, x1 = _split(x)
    grad = np.zeros(d)
    if r == 0.0:
        return grad
    theta1 = math.atan2(rho, x1)
    f = float(radial_profile(params, r))
    fp = float(radial_profile_d1(params, r))
    g = float(angular_profile(params, theta1))
    gp = float(angular_profile_d1(params, theta1))

    u_r = x / r
    if fp != 0.0 and g != 0.0:
        grad += (-params.lam * fp * g) * u_r
    if f != 0.0 and gp != 0.0:
        # u_theta = (-sin, cos * perp direction); rho != 0 is guaranteed
        # here because gp vanishes identically for |theta1| <= theta0.
        u_theta = np.empty(d)
        u_theta[0] = -math.sin(theta1)
        u_theta[1:] = math.cos(theta1) * (x[1:] / rho)
        grad += (-params.lam * f * gp / r) * u_theta
    return grad


def hess_n2(params: IndexParams, x) -> np.ndarray:
    """Analytic Cartesian Hessian of n^2; symmetric by construction."""
    x = np.asarray(x, dtype=float)
    d = x.size
    r, rho, x1 = _split(x)
    H = np.zeros((d, d))
    if r == 0.0:
        return H
    theta1 = math.atan2(rho, x1)
    f = float(radial_profile(params, r))
    fp = float(radial_profile_d1(params, r))
    fpp = float(radial_profile_d2(params, r))
    g = float(angular_profile(params, theta1))
    gp = float(angular_profile_d1(params, theta1))
    gpp = float(angular_profile_d2(params, theta1))

    # F = f g; n^2 = n_inf^2 - lam F.  All pieces short-circuit to zero
    # outside the bump, so H is exactly 0 there.
    Fr = fp * g
    Ft = f * gp
    Frr = fpp * g
    Frt = fp * gp
    Ftt = f * gpp
    if Fr == 0.0 and Ft == 0.0 and Frr == 0.0 and Frt == 0.0 and Ftt == 0.0:
        return H

    u_r = x / r
    eye = np.eye(d)
    hess_r = (eye - np.outer(u_r, u_r)) / r
    if Frr != 0.0:
        H += Frr * np.outer(u_r, u_r)
    if Fr != 0.0:
        H += Fr * hess_r

    angular_active = (Ft != 0.0) or (Frt != 0.0) or (Ftt != 0.0)
    if angular_active:
        # rho != 0 whenever any angular derivative of g is nonzero.
        s = math.sin(theta1)
        c = math.cos(theta1)
        u_theta = np.empty(d)
        u_theta[0] = -s
        u_theta[1:] = c * (x[1:] / rho)
        grad_t = u_theta / r
        if Frt != 0.0:
            cross = np.outer(u_r, grad_t)
            H += Frt * (cross + cross.T)
        if Ftt != 0.0:
            H += Ftt * np.outer(grad_t, grad_t)
        if Ft != 0.0:
            # Hessian of the polar angle theta_1(x); valid for d = 2 with
            # signed rho = x2 and for d >= 3 with rho = |x_perp|.
            hess_t = np.zeros((d, d))
            hess_t[0, 0] = 2.0 * s * c / r**2
            xhat = x[1:] / rho
            cross_val = -math.cos(2.0 * theta1) / r**2
            hess_t[0, 1:] = cross_val * xhat
            hess_t[1:, 0] = cross_val * xhat
            perp = np.outer(xhat, xhat)
            hess_t[1:, 1:] = (c / (r**2 * s)) * (np.eye(d - 1) - (2.0 * s**2 + 1.0) * perp)
            H += Ft * hess_t
    return -params.lam * H


def _frames_batch(params: IndexParams, X: np.ndarray):
    """Shared geometry for the batch derivative evaluators.

    X has shape (B, d).  Returns r, theta1, safe unit vectors and the
    profile values/derivatives, with inactive rows masked to zero.
    """
    X = np.asarray(X, dtype=float)
    B, d = X.shape
    r = np.linalg.norm(X, axis=1)
    rho = X[:, 1] if d == 2 else np.linalg.norm(X[:, 1:], axis=1)
    theta1 = np.arctan2(rho, X[:, 0])
    f = radial_profile(params, r)
    fp = radial_profile_d1(params, r)
    fpp = radial_profile_d2(params, r)
    g = angular_profile(params, theta1)
    gp = angular_profile_d1(params, theta1)
    gpp = angular_profile_d2(params, theta1)
    r_safe = np.where(r > 0.0, r, 1.0)
    rho_safe = np.where(rho != 0.0, rho, 1.0)
    u_r = X / r_safe[:, None]
    s = np.sin(theta1)
    c = np.cos(theta1)
    u_theta = np.empty_like(X)
    u_theta[:, 0] = -s
    u_theta[:, 1:] = c[:, None] * (X[:, 1:] / rho_safe[:, None])
    return r, r_safe, rho, rho_safe, theta1, s, c, u_r, u_theta, f, fp, fpp, g, gp, gpp


def grad_n2_batch(params: IndexParams, X) -> np.ndarray:
    """Vectorized gradient over a batch of points, shape (B, d) -> (B, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    (r, r_safe, rho, rho_safe, theta1, s, c,
     u_r, u_theta, f, fp, fpp, g, gp, gpp) = _frames_batch(params, X)
    coef_r = np.where(r > 0.0, -params.lam * fp * g, 0.0)
    coef_t = np.where(r > 0.0, -params.lam * f * gp / r_safe, 0.0)
    return coef_r[:, None] * u_r + coef_t[:, None] * u_theta


def hess_n2_batch(params: IndexParams, X) -> np.ndarray:
    """Vectorized Hessian over a batch of points, shape (B, d) -> (B, d, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B, d = X.shape
    (r, r_safe, rho, rho_safe, theta1, s, c,
     u_r, u_theta, f, fp, fpp, g, gp, gpp) = _frames_batch(params, X)
    active = r > 0.0
    Fr = np.where(active, fp * g, 0.0)
    Ft = np.where(active, f * gp, 0.0)
    Frr = np.where(active, fpp * g, 0.0)
    Frt = np.where(active, fp * gp, 0.0)
    Ftt = np.where(active, f * gpp, 0.0)

    eye = np.eye(d)
    urur = u_r[:, :, None] * u_r[:, None, :]
    H = Frr[:, None, None] * urur
    H += (Fr / r_safe)[:, None, None] * (eye[None, :, :] - urur)
    grad_t = u_theta / r_safe[:, None]
    cross = u_r[:, :, None] * grad_t[:, None, :]
    H += Frt[:, None, None] * (cross + np.swapaxes(cross, 1, 2))
    H += Ftt[:, None, None] * (grad_t[:, :, None] * grad_t[:, None, :])

    # Hessian of theta_1(x), applied only where the angular slope is live
    # (there s is bounded away from 0 because g' vanishes near the axis).
    ang = Ft != 0.0
    if np.any(ang):
        s_safe = np.where(np.abs(s) > 0.0, s, 1.0)
        xhat = X[:, 1:] / rho_safe[:, None]
        ht = np.zeros((B, d, d))
        ht[:, 0, 0] = 2.0 * s * c / r_safe**2
        cv = -np.cos(2.0 * theta1) / r_safe**2
        ht[:, 0, 1:] = cv[:, None] * xhat
        ht[:, 1:, 0] = cv[:, None] * xhat
        perp = xhat[:, :, None] * xhat[:, None, :]
        ht[:, 1:, 1:] = (c / (r_safe**2 * s_safe))[:, None, None] * (
            np.eye(d - 1)[None, :, :] - (2.0 * s**2 + 1.0)[:, None, None] * perp)
        H += np.where(ang, Ft, 0.0)[:, None, None] * ht
    return -params.lam * H


def classify_region(params: IndexParams, x) -> RegionTag:
    r, rho, x1 = _split(x)
    theta1 = math.atan2(abs(rho), x1) if r > 0.0 else 0.0
    if n2(params, x) < 0.0:
        return RegionTag.FORBIDDEN
    if params.R - 1.0 <= r <= params.R + 1.0 and abs(theta1) <= 2.0 * params.theta0:
        return RegionTag.BUMP
    return RegionTag.FREE


def check_admissible(params: IndexParams) -> list:
    """Return the list of violated parameter constraints (empty = ok)."""
    violations = []
    if not params.n_inf_sq > 0.0:
        violations.append("n_inf_sq must be positive")
    if not params.lam > params.n_inf_sq:
        violations.append("lambda must exceed n_inf_sq")
    if not 0.0 < params.theta0 < math.pi / 4.0:
        violations.append("theta0 must lie in (0, pi/4)")
    if not params.R > 1.0:
        violations.append("R must exceed 1 (origin must sit outside the bump)")
    if params.R > 0.0 and not (1.0 - math.cos(2.0 * params.theta0)) < 1.0 / (2.0 * params.R):
        violations.append("smallness condition 1 - cos(2 theta0) < 1/(2R) violated")
    if params.d not in (2, 3):
        violations.append("dimension d must be 2 or 3")
    return violations


def require_admissible(params: IndexParams) -> None:
    violations = check_admissible(params)
    if violations:
        raise ValueError("inadmissible index parameters: " + "; ".join(violations))
