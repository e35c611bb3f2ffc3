"""Outgoing far field and the refocusing perturbation functional.

The outgoing solution w_out is the limiting-absorption resolvent applied
to the source: on the Fourier side S^(xi) / (i delta + n^2(0) - |xi|^2/2)
with delta -> 0+.  Pairings <w_out, phi> are computed per delta by exact
Fourier-side quadrature (radial reduction of the shell-singular factor)
and Richardson-extrapolated in delta; grid fields from the inverse
discrete transform support the radiation-sign check against an
independent 1d radial resolvent reference.

The perturbation functional pairs the source and test function over the
returning momentum cap:

    C * exp(i A / eps) * int_cap S^(xi) (phi*)^(-xi) dsigma(xi)

with A the common cap action and C the assembled stationary-phase
constant.  All Fourier conventions are the unitary e^{-i x.xi} forward
transform and are recorded in every report.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.integrate import quad

from .errors import GridTooCoarse, NonConvergent, UnsupportedFunction
from .fields import GridField, GridSpec
from .index import IndexParams, require_admissible

FOURIER_CONVENTION = "unitary: F[S](xi) = (2 pi)^{-d/2} int S(x) e^{-i x.xi} dx"


@dataclass(frozen=True)
class GaussianSource:
    """Gaussian packet amp * exp(-|x-c|^2/(2 sigma^2)) * exp(i k0.x).

    Closed-form unitary Fourier transform:
    amp * sigma^d * exp(-sigma^2 |xi-k0|^2 / 2) * exp(-i c.(xi-k0)).
    """
    center: tuple
    k0: tuple
    sigma: float = 1.0
    amp: complex = 1.0 + 0.0j

    @property
    def d(self) -> int:
        return len(self.center)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        c = np.asarray(self.center)
        k = np.asarray(self.k0)
        dx = X - c
        return (self.amp * np.exp(-np.sum(dx * dx, axis=-1) / (2.0 * self.sigma**2))
                * np.exp(1j * (X @ k)))

    def fourier(self, K) -> np.ndarray:
        K = np.asarray(K, dtype=float)
        c = np.asarray(self.center)
        k0 = np.asarray(self.k0)
        dk = K - k0
        return (self.amp * self.sigma**self.d
                * np.exp(-self.sigma**2 * np.sum(dk * dk, axis=-1) / 2.0)
                * np.exp(-1j * (dk @ c)))

    def conjugate(self) -> "GaussianSource":
        return GaussianSource(center=self.center,
                              k0=tuple(-v for v in self.k0),
                              sigma=self.sigma,
                              amp=complex(self.amp).conjugate())

    def k_support_radius(self, tail: float = 10.0) -> float:
        return float(np.linalg.norm(self.k0) + tail / self.sigma)


def fourier(S, xi):
    """Closed-form unitary transform for the supported family."""
    if not isinstance(S, GaussianSource):
        raise UnsupportedFunction(f"no closed-form transform for {type(S).__name__}")
    return S.fourier(xi)


# ----------------------------------------------------------------------
# cap quadrature
# ----------------------------------------------------------------------

@dataclass
class CapQuadrature:
    """Nodes/weights on the returning momentum cap.

    The measure is n(0)^{d-1} times the unit-sphere surface measure
    restricted to theta_1 <= theta0: Gauss-Legendre in cos(theta_1)
    (exact for polynomials in cos theta_1) times trapezoid in azimuth for
    d = 3; Gauss-Legendre in theta_1 for d = 2.
    """
    params: IndexParams
    nodes: np.ndarray
    weights: np.ndarray
    n_theta1: int
    n_azimuth: int

    @classmethod
    def build(cls, params: IndexParams, n_theta1: int = 32,
              n_azimuth: int = 64) -> "CapQuadrature":
        require_admissible(params)
        d = params.d
        rho0 = params.zero_energy_speed
        n0 = math.sqrt(params.n0_sq)
        if d == 3:
            u, wu = np.polynomial.legendre.leggauss(n_theta1)
            a, b = math.cos(params.theta0), 1.0
            uu = 0.5 * (b - a) * u + 0.5 * (a + b)
            wu = 0.5 * (b - a) * wu
            phis = np.linspace(0.0, 2.0 * math.pi, n_azimuth, endpoint=False)
            wphi = 2.0 * math.pi / n_azimuth
            U, PHI = np.meshgrid(uu, phis, indexing="ij")
            W = np.outer(wu, np.full(n_azimuth, wphi))
            s = np.sqrt(np.clip(1.0 - U**2, 0.0, None))
            nodes = rho0 * np.stack([U, s * np.cos(PHI), s * np.sin(PHI)], axis=-1)
            weights = (n0 ** (d - 1)) * W
            return cls(params=params, nodes=nodes.reshape(-1, 3),
                       weights=weights.ravel(), n_theta1=n_theta1,
                       n_azimuth=n_azimuth)
        th, wth = np.polynomial.legendre.leggauss(n_theta1)
        a, b = -params.theta0, params.theta0
        tt = 0.5 * (b - a) * th + 0.5 * (a + b)
        wth = 0.5 * (b - a) * wth
        nodes = rho0 * np.column_stack([np.cos(tt), np.sin(tt)])
        weights = (n0 ** (d - 1)) * wth
        return cls(params=params, nodes=nodes, weights=weights,
                   n_theta1=n_theta1, n_azimuth=1)

    @property
    def exact_measure(self) -> float:
        n0 = math.sqrt(self.params.n0_sq)
        if self.params.d == 3:
            return n0**2 * 2.0 * math.pi * (1.0 - math.cos(self.params.theta0))
        return n0 * 2.0 * self.params.theta0

    def integrate(self, values) -> complex:
        return complex(np.sum(self.weights * np.asarray(values)))


# ----------------------------------------------------------------------
# the cap perturbation functional
# ----------------------------------------------------------------------

_CONSTANT_CACHE: dict = {}
_ACTION_CACHE: dict = {}


def _cap_action(params: IndexParams, gate: float = 1e-5) -> float:
    """Common action over the cap; errors out if the spread exceeds gate."""
    key = params.to_json()
    if key not in _ACTION_CACHE:
        from .coords import unit_from_angles
        from .refocus import RayKind, classify_ray
        actions = []
        fractions = (0.0, 0.45, 0.9)
        for frac in fractions:
            angles = (frac * params.theta0,) + (0.6,) * (params.d - 2)
            v = classify_ray(params, unit_from_angles(angles), tol=1e-12)
            if v.kind is not RayKind.RETURNING:
                raise ValueError(f"cap direction at {frac} theta0 did not return")
            actions.append(v.action)
        spread = (max(actions) - min(actions)) / abs(actions[0])
        if spread > gate:
            raise NonConvergent(f"cap action spread {spread:.2e} exceeds gate {gate:.0e}")
        _ACTION_CACHE[key] = (float(np.mean(actions)), float(spread))
    return _ACTION_CACHE[key][0]


def _cap_constant(params: IndexParams):
    key = params.to_json()
    if key not in _CONSTANT_CACHE:
        from .phase import stationary_phase_constant
        _CONSTANT_CACHE[key] = stationary_phase_constant(params)
    return _CONSTANT_CACHE[key]


@dataclass
class CapPairing:
    value: complex
    constant: complex
    action: float
    eps: float
    cap_integral: complex
    n_theta1: int
    conventions: dict = field(default_factory=dict)


def l_eps(params: IndexParams, S: GaussianSource, phi: GaussianSource,
          eps: float, n_theta1: int = 32, n_azimuth: int = 64,
          constant: complex = None) -> CapPairing:
    """Cap perturbation pairing C exp(iA/eps) int S^ (phi^)* dsigma.

    The integrand is S^(xi) * F[phi*](-xi) (= S^(xi) conj(phi^(xi))); the
    constant defaults to the assembled stationary-phase constant and may
    be overridden (it is a pure prefactor).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    A = _cap_action(params)
    C = complex(constant) if constant is not None else _cap_constant(params).value
    quadr = CapQuadrature.build(params, n_theta1=n_theta1, n_azimuth=n_azimuth)
    vals = S.fourier(quadr.nodes) * phi.conjugate().fourier(-quadr.nodes)
    integral = quadr.integrate(vals)
    value = C * cmath.exp(1j * A / eps) * integral
    return CapPairing(value=complex(value), constant=C, action=A, eps=eps,
                      cap_integral=complex(integral), n_theta1=n_theta1,
                      conventions={"fourier": FOURIER_CONVENTION,
                                   "cap_measure": "n(0)^{d-1} d sigma(unit sphere)"})


# ----------------------------------------------------------------------
# w_out: pairings by Fourier-side quadrature, fields by inverse DFT
# ----------------------------------------------------------------------

def _sphere_rule(n_theta: int = 48, n_phi: int = 96):
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    phis = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    wphi = 2.0 * math.pi / n_phi
    U, PHI = np.meshgrid(u, phis, indexing="ij")
    s = np.sqrt(np.clip(1.0 - U**2, 0.0, None))
    nodes = np.stack([U, s * np.cos(PHI), s * np.sin(PHI)], axis=-1).reshape(-1, 3)
    weights = np.outer(wu, np.full(n_phi, wphi)).ravel()
    return nodes, weights


def pairing_for_delta(params: IndexParams, S: GaussianSource, phi: GaussianSource,
                      delta: float) -> complex:
    """<w_out^delta, phi> = int S^(xi) conj(phi^(xi)) / (i delta + c - |xi|^2/2) dxi.

    Exact Fourier-side evaluation: the angular average is reduced by a
    product sphere rule, the radial integral handled by adaptive
    quadrature split at the resonant shell.
    """
    c = params.n0_sq
    d = params.d
    rho_shell = math.sqrt(2.0 * c)
    rho_max = max(S.k_support_radius(), phi.k_support_radius(), rho_shell + 4.0)

    if d == 3:
        nodes, weights = _sphere_rule()
    else:
        th = np.linspace(0.0, 2.0 * math.pi, 256, endpoint=False)
        nodes = np.column_stack([np.cos(th), np.sin(th)])
        weights = np.full(th.size, 2.0 * math.pi / th.size)

    def shell_avg(rho):
        K = rho * nodes
        vals = S.fourier(K) * np.conj(phi.fourier(K))
        return complex(np.sum(weights * vals)) * rho ** (d - 1)

    def integrand_re(rho):
        return (shell_avg(rho) / (1j * delta + c - rho * rho / 2.0)).real

    def integrand_im(rho):
        return (shell_avg(rho) / (1j * delta + c - rho * rho / 2.0)).imag

    pts = [rho_shell] if rho_shell < rho_max else None
    re, _ = quad(integrand_re, 0.0, rho_max, points=pts, limit=400,
                 epsabs=1e-12, epsrel=1e-10)
    im, _ = quad(integrand_im, 0.0, rho_max, points=pts, limit=400,
                 epsabs=1e-12, epsrel=1e-10)
    return complex(re + 1j * im)


def pairing_limit(params: IndexParams, S: GaussianSource,
                  phi: GaussianSource) -> complex:
    """delta -> 0+ pairing via principal value + i pi residue on the shell."""
    c = params.n0_sq
    d = params.d
    rho0 = math.sqrt(2.0 * c)
    rho_max = max(S.k_support_radius(), phi.k_support_radius(), rho0 + 4.0)
    if d == 3:
        nodes, weights = _sphere_rule()
    else:
        th = np.linspace(0.0, 2.0 * math.pi, 256, endpoint=False)
        nodes = np.column_stack([np.cos(th), np.sin(th)])
        weights = np.full(th.size, 2.0 * math.pi / th.size)

    def shell_avg(rho):
        K = rho * nodes
        vals = S.fourier(K) * np.conj(phi.fourier(K))
        return complex(np.sum(weights * vals)) * rho ** (d - 1)

    # 1/(i delta + c - rho^2/2) -> PV 1/(c - rho^2/2) - i pi delta(c - rho^2/2);
    # the delta function picks up shell_avg(rho0)/rho0 on the shell.
    def f_combined(rho):
        return shell_avg(rho)

    # PV int_0^rho_max g(rho)/(c - rho^2/2) drho with simple pole at rho0:
    # c - rho^2/2 = -(rho - rho0)(rho + rho0)/2
    def regular_part(rho):
        return -2.0 * f_combined(rho) / (rho + rho0)

    eps_pv = 1e-6
    left, _ = quad(lambda r: (regular_part(r) / (r - rho0)).real, 0.0,
                   rho0 - eps_pv, limit=400, epsabs=1e-12, epsrel=1e-10)
    right, _ = quad(lambda r: (regular_part(r) / (r - rho0)).real,
                    rho0 + eps_pv, rho_max, limit=400, epsabs=1e-12, epsrel=1e-10)
    lefti, _ = quad(lambda r: (regular_part(r) / (r - rho0)).imag, 0.0,
                    rho0 - eps_pv, limit=400, epsabs=1e-12, epsrel=1e-10)
    righti, _ = quad(lambda r: (regular_part(r) / (r - rho0)).imag,
                     rho0 + eps_pv, rho_max, limit=400, epsabs=1e-12, epsrel=1e-10)
    # Taylor correction for the excluded symmetric window: PV of g0/(r-rho0)
    # over (rho0 - eps, rho0 + eps) = 2 eps g0'(rho0) + O(eps^3)
    h = 1e-4
    gprime = (regular_part(rho0 + h) - regular_part(rho0 - h)) / (2.0 * h)
    pv = (left + right) + 1j * (lefti + righti) + 2.0 * eps_pv * gprime
    residue = -1j * math.pi * f_combined(rho0) / rho0
    return complex(pv + residue)


def richardson(deltas, values):
    """Neville polynomial extrapolation of values(delta) to delta = 0."""
    deltas = [float(v) for v in deltas]
    tbl = [complex(v) for v in values]
    n = len(tbl)
    for m in range(1, n):
        new = []
        for i in range(n - m):
            num = (0.0 - deltas[i + m]) * tbl[i] - (0.0 - deltas[i]) * tbl[i + 1]
            new.append(num / (deltas[i] - deltas[i + m]))
        tbl = new
    return tbl[0]


def field_for_delta(params: IndexParams, S: GaussianSource, spec: GridSpec,
                    delta: float) -> GridField:
    """Inverse discrete transform of S^(xi)/(i delta + c - |xi|^2/2)."""
    c = params.n0_sq
    wavelength = 2.0 * math.pi / math.sqrt(2.0 * c)
    if spec.k_max < 3.0 * math.sqrt(2.0 * c):
        raise GridTooCoarse(
            f"grid k_max {spec.k_max:.2f} does not resolve the free wavelength {wavelength:.2f}")
    if spec.k_max < 1.1 * S.k_support_radius():
        raise GridTooCoarse("grid does not resolve the source spectrum")
    Ks = spec.kmeshgrid()
    K = np.stack(Ks, axis=-1)
    Shat = S.fourier(K)
    denom = 1j * delta + c - 0.5 * sum(k * k for k in Ks)
    What = Shat / denom
    # x0 offset phase so values sit on the requested box
    phase = np.ones_like(What)
    for axis in range(spec.d):
        shape = [1] * spec.d
        shape[axis] = spec.n[axis]
        phase = phase * np.exp(1j * spec.kaxis(axis) * spec.x0[axis]).reshape(shape)
    dks = [2.0 * math.pi / L for L in spec.L]
    scale = (2.0 * math.pi) ** (-spec.d / 2.0) * float(np.prod(dks)) * float(np.prod(spec.n))
    w = sfft.ifftn(What * phase, workers=-1) * scale
    return GridField(spec=spec, values=w)


def shell_phase_sign(field: GridField, r1: float, r2: float,
                     n_dirs: int = 400, seed: int = 3) -> float:
    """Sign s in w ~ exp(i s k |x|)/|x| measured between two shells."""
    from scipy.ndimage import map_coordinates
    spec = field.spec
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_dirs, spec.d))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]

    def sample(r):
        pts = r * dirs
        idx = [(pts[:, k] - spec.x0[k]) / spec.dx[k] for k in range(spec.d)]
        re = map_coordinates(field.values.real, idx, order=1, mode="grid-wrap")
        im = map_coordinates(field.values.imag, idx, order=1, mode="grid-wrap")
        return re + 1j * im

    corr = np.mean(sample(r2) * np.conj(sample(r1)))
    return float(np.sign(np.angle(corr)))


def reference_phase_sign(params: IndexParams, delta: float = 1e-3,
                         sigma: float = 1.0, r1: float = 10.0,
                         r2: float = None) -> float:
    """Radiation sign of the resolvent limit from a 1d radial quadrature.

    Applies the limiting-absorption resolvent to an isotropic Gaussian via
    the radial inversion formula (d = 3) and measures the phase advance
    between two far-field radii; independent of any FFT grid.
    """
    c = params.n0_sq
    k0 = math.sqrt(2.0 * c)
    if r2 is None:
        r2 = r1 + 0.25 * (2.0 * math.pi / k0)
    rho_max = k0 + 10.0 / sigma

    def w_ref(r):
        def ig_re(rho):
            g = (sigma**3 * math.exp(-sigma**2 * rho**2 / 2.0)
                 * rho * math.sin(rho * r))
            return (g / (1j * delta + c - rho * rho / 2.0)).real

        def ig_im(rho):
            g = (sigma**3 * math.exp(-sigma**2 * rho**2 / 2.0)
                 * rho * math.sin(rho * r))
            return (g / (1j * delta + c - rho * rho / 2.0)).imag

        re, _ = quad(ig_re, 0.0, rho_max, points=[k0], limit=400,
                     epsabs=1e-13, epsrel=1e-11)
        im, _ = quad(ig_im, 0.0, rho_max, points=[k0], limit=400,
                     epsabs=1e-13, epsrel=1e-11)
        return (re + 1j * im) * (2.0 * math.pi) ** (-1.5) * 4.0 * math.pi / r

    corr = w_ref(r2) * np.conj(w_ref(r1))
    return float(np.sign(np.angle(corr)))


@dataclass
class WOutReport:
    pairing: complex
    pairings_by_delta: dict
    drift: float
    delta_list: tuple
    sommerfeld_sign: float
    sommerfeld_reference_sign: float
    pairing_plemelj: complex
    conventions: dict
    field: GridField = None


def w_out_eval(params: IndexParams, S: GaussianSource, phi: GaussianSource,
               spec: GridSpec, delta_list, keep_field: bool = True,
               sommerfeld_delta: float = 0.15) -> WOutReport:
    """Pairing <w_out, phi> with delta -> 0+ extrapolation plus field checks.

    Pairings per delta are exact Fourier-side integrals (Parseval); the
    grid field at a box-compatible absorption drives the radiation-sign
    measurement, compared against the grid-free radial reference.
    """
    deltas = tuple(float(v) for v in delta_list)
    if not all(a > b for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta_list must be decreasing")
    pairings = {dlt: pairing_for_delta(params, S, phi, dlt) for dlt in deltas}
    vals = [pairings[dlt] for dlt in deltas]
    extr_all = richardson(deltas, vals)
    extr_tail = richardson(deltas[-2:], vals[-2:]) if len(deltas) >= 2 else extr_all
    denom = max(abs(extr_all), 1e-300)
    drift = abs(extr_all - extr_tail) / denom
    plemelj = pairing_limit(params, S, phi)
    if abs(plemelj - extr_all) / denom > 200.0 * max(drift, 1e-12):
        raise NonConvergent(
            f"delta extrapolation ({extr_all:.6g}) inconsistent with the "
            f"Plemelj limit ({plemelj:.6g})")
    fld = None
    sign = ref_sign = 0.0
    if keep_field and params.d == 3:
        fld = field_for_delta(params, S, spec, sommerfeld_delta)
        k0 = math.sqrt(2.0 * params.n0_sq)
        r1 = min(0.3 * min(spec.L) / 2.0, 12.0)
        sign = shell_phase_sign(fld, r1, r1 + 0.25 * 2.0 * math.pi / k0)
        ref_sign = reference_phase_sign(params, delta=sommerfeld_delta)
    return WOutReport(pairing=complex(extr_all), pairings_by_delta=pairings,
                      drift=float(drift), delta_list=deltas,
                      sommerfeld_sign=sign, sommerfeld_reference_sign=ref_sign,
                      pairing_plemelj=complex(plemelj),
                      conventions={"fourier": FOURIER_CONVENTION,
                                   "resolvent": "(i delta + Laplacian/2 + n^2(0))^{-1}"},
                      field=fld)


@dataclass
class LimitPairing:
    total: complex
    w_out: complex
    l_eps_value: complex
    eps: float


def perturbed_limit_pairing(params: IndexParams, S: GaussianSource,
                            phi: GaussianSource, eps: float,
                            spec: GridSpec = None, delta_list=(1e-2, 5e-3, 2.5e-3),
                            n_theta1: int = 32) -> LimitPairing:
    """<w_out, phi> + <L_eps, phi>: the asserted limit object."""
    if spec is None:
        spec = GridSpec(n=(64,) * params.d, L=(40.0,) * params.d,
                        x0=(-20.0,) * params.d)
    wrep = w_out_eval(params, S, phi, spec, delta_list, keep_field=False)
    lrep = l_eps(params, S, phi, eps, n_theta1=n_theta1)
    return LimitPairing(total=wrep.pairing + lrep.value, w_out=wrep.pairing,
                        l_eps_value=lrep.value, eps=eps)
