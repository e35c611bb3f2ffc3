"""Smooth cutoff function and hyperspherical coordinate conversions.

Every other module builds on the two objects defined here: an even,
C-infinity cutoff ``chi`` (1 on [-1, 1], 0 outside (-2, 2), strictly
decreasing across the transition band) together with its first two
analytic derivatives, and Cartesian <-> hyperspherical conversions in
dimensions 2 and 3 (the formulas are written for general d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Decay constant of the boundary mollifier exp(-SHARPNESS / s).  Smaller
# values make the transition band contact less flat, which sets how fast
# ray deflection switches on just outside the aperture cone; 1/2 keeps the
# numerically resolvable edge of the returning cap within ~2.5% of the
# nominal aperture while leaving deflections at 5% past the aperture
# macroscopic (> 1e-3 miss distance).
SHARPNESS = 0.5

# exp(-SHARPNESS/s) underflows all relevant tolerances below this s.
_S_TINY = SHARPNESS / 45.0


def _sigma(s):
    """Boundary mollifier exp(-SHARPNESS/s) for s > 0, extended by 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > _S_TINY
    out[m] = np.exp(-SHARPNESS / s[m])
    return out


def _sigma_d1(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > _S_TINY
    sm = s[m]
    out[m] = np.exp(-SHARPNESS / sm) * SHARPNESS / sm**2
    return out


def _sigma_d2(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > _S_TINY
    sm = s[m]
    out[m] = np.exp(-SHARPNESS / sm) * SHARPNESS * (SHARPNESS - 2.0 * sm) / sm**4
    return out


def _smoothstep(s):
    """h(s) = sigma(s) / (sigma(s) + sigma(1-s)): 0 for s<=0, 1 for s>=1."""
    s = np.asarray(s, dtype=float)
    a = _sigma(np.clip(s, 0.0, None))
    b = _sigma(np.clip(1.0 - s, 0.0, None))
    den = a + b
    # den > 0 on (0, 1); endpoints resolved by the clip masks below.
    with np.errstate(invalid="ignore", divide="ignore"):
        h = np.where(den > 0.0, a / np.where(den > 0.0, den, 1.0), 0.0)
    h = np.where(s <= 0.0, 0.0, h)
    h = np.where(s >= 1.0, 1.0, h)
    return h


def _smoothstep_d1(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(s)
    si = s[inside]
    a, b = _sigma(si), _sigma(1.0 - si)
    a1, b1 = _sigma_d1(si), _sigma_d1(1.0 - si)
    den = a + b
    out[inside] = (a1 * b + a * b1) / den**2
    return out


def _smoothstep_d2(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(s)
    si = s[inside]
    a, b = _sigma(si), _sigma(1.0 - si)
    a1, b1 = _sigma_d1(si), _sigma_d1(1.0 - si)
    a2, b2 = _sigma_d2(si), _sigma_d2(1.0 - si)
    den = a + b
    num1 = a1 * b + a * b1          # numerator of h'
    dnum1 = a2 * b - a * b2         # d/ds of num1 (cross terms cancel)
    dden = a1 - b1
    out[inside] = dnum1 / den**2 - 2.0 * num1 * dden / den**3
    return out


def chi(t):
    """Even cutoff: 1 on \\|t\\| <= 1, 0 on \\|t\\| >= 2, smooth in between."""
    t = np.abs(np.asarray(t, dtype=float))
    scalar = t.ndim == 0
    v = _smoothstep(2.0 - np.atleast_1d(t))
    return float(v[0]) if scalar else v


def chi_prime(t):
    """Exact first derivative of the implemented ``chi``."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    ta = np.atleast_1d(t)
    v = -np.sign(ta) * _smoothstep_d1(2.0 - np.abs(ta))
    return float(v[0]) if scalar else v


def chi_second(t):
    """Exact second derivative of the implemented ``chi``."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    ta = np.atleast_1d(t)
    v = _smoothstep_d2(2.0 - np.abs(ta))
    return float(v[0]) if scalar else v


@dataclass(frozen=True)
class HypersphericalPoint:
    """Radius plus angles (theta_1, ..., theta_{d-1}).

    theta_1 is the unsigned angle to the e1 axis in [0, pi] for d >= 3 and
    the signed angle in [-pi, pi] for d = 2.  ``degenerate`` flags points
    where some angles were reported as 0 by convention (r = 0, or on-axis
    points in d >= 3).
    """

    r: float
    angles: tuple
    degenerate: bool = False

    @property
    def theta1(self) -> float:
        return self.angles[0]


def axis_angle(x):
    """Angle theta_1 between x and the e1 axis (signed for d = 2)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 2:
        return np.arctan2(x[..., 1], x[..., 0])
    tail = np.linalg.norm(x[..., 1:], axis=-1)
    return np.arctan2(tail, x[..., 0])


def to_hyperspherical(x) -> HypersphericalPoint:
    x = np.asarray(x, dtype=float)
    d = x.size
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return HypersphericalPoint(0.0, (0.0,) * (d - 1), degenerate=True)
    if d == 2:
        return HypersphericalPoint(r, (float(np.arctan2(x[1], x[0])),))
    angles = []
    degenerate = False
    for j in range(d - 2):
        tail = float(np.linalg.norm(x[j + 1:]))
        if tail == 0.0:
            # on-axis: remaining angles are 0 (or the leading one pi).
            angles.append(0.0 if x[j] >= 0.0 else np.pi)
            angles.extend([0.0] * (d - 2 - j))
            degenerate = True
            break
        angles.append(float(np.arctan2(tail, x[j])))
    else:
        last = float(np.arctan2(x[-1], x[-2])) % (2.0 * np.pi)
        angles.append(last)
    return HypersphericalPoint(r, tuple(angles), degenerate=degenerate)


def from_hyperspherical(r, angles) -> np.ndarray:
    angles = tuple(angles)
    d = len(angles) + 1
    x = np.empty(d)
    sin_prod = 1.0
    for j in range(d - 1):
        x[j] = r * sin_prod * np.cos(angles[j])
        sin_prod *= np.sin(angles[j])
    x[d - 1] = r * sin_prod
    return x


def unit_from_angles(angles) -> np.ndarray:
    """Unit vector with the given hyperspherical angles."""
    return from_hyperspherical(1.0, angles)


def rotation_to_axis(p) -> np.ndarray:
    """Orthogonal matrix R with R p = |p| e1.

    For d = 3 this is the geodesic rotation in the span of p and e1
    (Rodrigues form); for d = 2 the plane rotation by -theta_1(p).
    """
    p = np.asarray(p, dtype=float)
    d = p.size
    norm = np.linalg.norm(p)
    if norm == 0.0:
        return np.eye(d)
    u = p / norm
    e1 = np.zeros(d)
    e1[0] = 1.0
    if d == 2:
        c, s = u[0], u[1]
        return np.array([[c, s], [-s, c]])
    c = float(u @ e1)
    if c > 1.0 - 1e-15:
        return np.eye(d)
    if c < -1.0 + 1e-15:
        # p antiparallel to e1: rotate by pi about e2.
        R = -np.eye(d)
        R[1, 1] = 1.0
        return R
    axis = np.cross(u, e1)
    s = np.linalg.norm(axis)
    axis = axis / s
    K = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)
