"""
Fractional Sub-Laplacian Module

Quadrature for (-Delta_H)^s u(xi) = -(c/2) int (u(xi o eta) + u(xi o eta^-1) - 2u(xi)) |eta|^(-Q-2s) d eta.

The integral is split into three pieces:

- |eta| < r0: the second difference of the local quadratic model, integrated in closed form
- r0 <= |eta| <= R: geometric annuli, each with a tensor rule in gauge-polar coordinates
  eta = Phi_r(sqrt(cos phi) omega, sin phi), for which d eta = r^(Q-1) cos^(N-1) phi dr dphi domega
- |eta| > R: dropped, with the certified bound `tail_bound`

Quadrature nodes come in (eta, -eta) pairs; only one node of each pair is stored and the
symmetric second difference is formed per pair. Partial sums are taken per annulus with
numpy and combined across annuli with math.fsum in annulus order, so results do not depend
on how evaluation points are chunked or threaded.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .errors import ConfigurationError, DomainError
from .hcalculus import horizontal_gradient_coords, horizontal_hessian_coords
from .hgroup import (
    GroupPoint,
    as_coords,
    compose_coords,
    cos_power_integral,
    gauge_sphere_constant,
    sphere_area,
)
from .pucci import Ellipticity


POINT_CHUNK = 32

# largest tail radius a quadrature rule is built for
MAX_TAIL_RADIUS = 1e100

_ATTRS = {'lambda': 'lam', 'Lambda': 'Lam'}


@dataclass(frozen=True)
class OperatorParams:
    """Every scalar parameter of L u = alpha M+(D^2_H u) - beta (-Delta_H)^s u"""
    alpha: float = 1.0
    beta: float = 1.0
    lam: float = 1.0
    Lam: float = 1.0
    s: float = 0.5
    c_norm: float = 1.0
    N: int = 1

    def __post_init__(self):
        checks = [
            ('alpha', math.isfinite(self.alpha) and self.alpha >= 0, "alpha must be >= 0"),
            ('beta', math.isfinite(self.beta) and self.beta > 0, "beta must be > 0"),
            ('lambda', math.isfinite(self.lam) and self.lam > 0, "lambda must be > 0"),
            ('Lambda', math.isfinite(self.Lam) and self.Lam >= self.lam,
             f"Lambda must be >= lambda ({self.lam:g})"),
            ('s', 0 < self.s < 1, "s must lie in the open interval (0, 1)"),
            ('c_norm', math.isfinite(self.c_norm) and self.c_norm > 0, "c_norm must be > 0"),
            ('N', int(self.N) == self.N and self.N >= 1, "N must be a positive integer"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ConfigurationError(name, f"{message}, got {getattr(self, _ATTRS.get(name, name))}")
        object.__setattr__(self, 'N', int(self.N))

    @property
    def ellipticity(self) -> Ellipticity:
        return Ellipticity(self.lam, self.Lam)

    @property
    def Q(self) -> int:
        return 2 * self.N + 2

    def to_dict(self) -> dict:
        return {'alpha': self.alpha, 'beta': self.beta, 'lambda': self.lam, 'Lambda': self.Lam,
                's': self.s, 'c_norm': self.c_norm, 'N': self.N}


def required_tail_radius(params: OperatorParams, tail_tolerance: float) -> float:
    """Smallest R with sigma_gauge R^(-2s) / (2s) <= tail_tolerance

    Worked in logarithms: for small s the radius grows like tolerance^(-1/(2s)).
    Radii past MAX_TAIL_RADIUS are refused.
    """
    sigma = gauge_sphere_constant(params.N)
    log_R = math.log(sigma / (2.0 * params.s * tail_tolerance)) / (2.0 * params.s)
    if not log_R <= math.log(MAX_TAIL_RADIUS):
        raise ConfigurationError(
            'tail_tolerance',
            f"{tail_tolerance:g} needs a tail radius near 1e{log_R / math.log(10.0):.0f} at s = {params.s:g}, "
            f"past the limit {MAX_TAIL_RADIUS:g}; raise tail_tolerance",
        )
    return math.exp(log_R)


@dataclass(frozen=True)
class QuadratureSpec:
    """Annular quadrature settings

    tail_radius None means "smallest radius meeting tail_tolerance". tail_tolerance is
    relative: the dropped tail is at most tail_tolerance * c_norm * sup|u - u(xi)|.
    points_per_annulus is the radial Gauss-Legendre order; polar_points and
    azimuth_points fix the angular rule on the unit gauge sphere.
    """
    inner_radius: float = 1e-3
    tail_radius: Optional[float] = None
    annuli_per_decade: int = 4
    points_per_annulus: int = 8
    tail_tolerance: float = 1e-4
    polar_points: int = 16
    azimuth_points: int = 24

    def __post_init__(self):
        if not (math.isfinite(self.inner_radius) and self.inner_radius > 0):
            raise ConfigurationError('inner_radius', f"must be > 0, got {self.inner_radius}")
        if self.tail_radius is not None and not (self.tail_radius > self.inner_radius):
            raise ConfigurationError('tail_radius', f"must exceed inner_radius, got {self.tail_radius}")
        if not self.tail_tolerance > 0:
            raise ConfigurationError('tail_tolerance', f"must be > 0, got {self.tail_tolerance}")
        for name in ('annuli_per_decade', 'points_per_annulus', 'polar_points', 'azimuth_points'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigurationError(name, f"must be a positive integer, got {value}")
        if self.azimuth_points % 2:
            raise ConfigurationError('azimuth_points', "must be even so that nodes pair up as (eta, -eta)")

    @classmethod
    def auto(cls, params: OperatorParams, **overrides) -> 'QuadratureSpec':
        spec = cls(**overrides)
        return replace(spec, tail_radius=required_tail_radius(params, spec.tail_tolerance))

    def resolved_tail_radius(self, params: OperatorParams) -> float:
        if self.tail_radius is not None:
            return float(self.tail_radius)
        return required_tail_radius(params, self.tail_tolerance)

    def to_dict(self) -> dict:
        return {
            'inner_radius': self.inner_radius,
            'tail_radius': self.tail_radius,
            'annuli_per_decade': self.annuli_per_decade,
            'points_per_annulus': self.points_per_annulus,
            'tail_tolerance': self.tail_tolerance,
            'polar_points': self.polar_points,
            'azimuth_points': self.azimuth_points,
        }


def tail_bound(R: float, params: OperatorParams, sup_u: float) -> float:
    """Certified bound on the dropped |eta| > R part of the operator

    sup_u bounds |u - u(xi)| (sup|u| + |u(xi)| will do). Value is
    sup_u * c_norm * sigma_gauge * R^(-2s) / (2s).
    """
    if R <= 0:
        raise DomainError(f"tail radius must be positive, got {R}")
    sigma = gauge_sphere_constant(params.N)
    return sup_u * params.c_norm * sigma * R ** (-2.0 * params.s) / (2.0 * params.s)


def inner_moments(N: int, s: float, r0: float) -> Tuple[float, float]:
    """(m_h, m_t) with int_{|eta|<r0} eta^T H eta |eta|^(-Q-2s) = m_h tr(H_horizontal) + m_t H_tt"""
    area = sphere_area(2 * N)
    m_h = r0 ** (2.0 - 2.0 * s) / (2.0 - 2.0 * s) * area / (2 * N) * cos_power_integral(N)
    m_t = (r0 ** (4.0 - 2.0 * s) / (4.0 - 2.0 * s) * area
           * (cos_power_integral(N - 1) - cos_power_integral(N + 1)))
    return m_h, m_t


def _inner_terms(u, coords: np.ndarray, r0: float, params: OperatorParams) -> np.ndarray:
    m_h, m_t = inner_moments(params.N, params.s, r0)
    sublap = np.trace(horizontal_hessian_coords(u, coords), axis1=-2, axis2=-1)
    u_tt = u.hessian_at(coords)[..., -1, -1]
    return m_h * sublap + m_t * u_tt


def inner_correction(u, xi: GroupPoint, r0: float, params: OperatorParams) -> float:
    """Contribution of |eta| < r0 to the second-difference kernel integral

    Uses the second difference of the local quadratic model, which for xi o eta affine in
    eta is eta^T J^T D^2u J eta. The horizontal block of J^T D^2u J is sigma D^2u sigma^T,
    so only the sub-Laplacian and u_tt survive the angular integration. Scales like r0^(2-2s).
    """
    if r0 <= 0:
        raise DomainError(f"inner radius must be positive, got {r0}")
    return float(_inner_terms(u, xi.to_array(), r0, params))


@dataclass(frozen=True)
class AnnulusRule:
    lower: float
    upper: float
    radii: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes for r_inner <= |eta| <= R; `half` keeps one node of each (eta, -eta) pair"""
    annuli: Tuple[AnnulusRule, ...]
    directions: np.ndarray
    direction_weights: np.ndarray
    half: bool

    def nodes(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """Flattened nodes (n_r * K, 2N+1) and weights of one annulus"""
        annulus = self.annuli[index]
        r = annulus.radii
        eta = self.directions[None, :, :] * r[:, None, None]
        eta[..., -1] *= r[:, None]
        w = annulus.weights[:, None] * self.direction_weights[None, :]
        return eta.reshape(-1, eta.shape[-1]), w.ravel()

    @property
    def node_count(self) -> int:
        return sum(a.radii.size for a in self.annuli) * self.direction_weights.size


def annulus_radii(r_inner: float, R: float, annuli_per_decade: int, extra: Sequence[float] = ()) -> np.ndarray:
    """Geometric annulus boundaries from r_inner to R, with extra breakpoints merged in"""
    n = max(1, math.ceil(annuli_per_decade * math.log10(R / r_inner)))
    radii = r_inner * (R / r_inner) ** (np.arange(n + 1) / n)
    radii[0], radii[-1] = r_inner, R
    extras = [float(b) for b in extra if r_inner < b < R]
    return np.unique(np.concatenate([radii, extras]))


def _circle(n: int, half: bool) -> Tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(n // 2 if half else n) / n
    return np.exp(1j * theta), np.full(theta.size, 2.0 * np.pi / n)


def sphere_rule(N: int, azimuth_points: int, hopf_points: int, half: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Rule on S^(2N-1) in C^N as (K, N) complex points and weights

    omega = (cos psi e^(i theta), sin psi omega') with d omega = cos psi sin^(2N-3) psi d psi d theta d omega'.
    `half` restricts the first azimuth to [0, pi), one representative per antipodal pair.
    """
    ring, ring_w = _circle(azimuth_points, half)
    if N == 1:
        return ring[:, None], ring_w
    inner, inner_w = sphere_rule(N - 1, azimuth_points, hopf_points)
    x, wx = np.polynomial.legendre.leggauss(hopf_points)
    psi = 0.25 * np.pi * (x + 1.0)
    w_psi = 0.25 * np.pi * wx * np.cos(psi) * np.sin(psi) ** (2 * N - 3)
    P, T, K = psi.size, ring.size, inner.shape[0]
    first = (np.cos(psi)[:, None, None] * ring[None, :, None]) * np.ones((1, 1, K))
    rest = np.sin(psi)[:, None, None, None] * inner[None, None, :, :] * np.ones((1, T, 1, 1))
    points = np.concatenate([first[..., None], rest], axis=-1).reshape(P * T * K, N)
    weights = (w_psi[:, None, None] * ring_w[None, :, None] * inner_w[None, None, :]).ravel()
    return points, weights


def gauge_sphere_rule(N: int, polar_points: int, azimuth_points: int, half: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Points on the unit gauge sphere (sqrt(cos phi) omega, sin phi) with the weights of the
    measure cos^(N-1) phi d phi d omega

    phi = (pi/2) sin(pi zeta / 2) with Gauss-Legendre in zeta removes the square-root
    behaviour at the poles.
    """
    zeta, wz = np.polynomial.legendre.leggauss(polar_points)
    phi = 0.5 * np.pi * np.sin(0.5 * np.pi * zeta)
    w_phi = wz * 0.25 * np.pi ** 2 * np.cos(0.5 * np.pi * zeta) * np.cos(phi) ** (N - 1)
    omega, w_omega = sphere_rule(N, azimuth_points, max(2, polar_points // 2), half)
    z = np.sqrt(np.cos(phi))[:, None, None] * omega[None, :, :]
    F, K = phi.size, omega.shape[0]
    directions = np.empty((F, K, 2 * N + 1))
    directions[..., :N] = z.real
    directions[..., N:2 * N] = z.imag
    directions[..., -1] = np.sin(phi)[:, None]
    weights = w_phi[:, None] * w_omega[None, :]
    return directions.reshape(F * K, 2 * N + 1), weights.ravel()


@lru_cache(maxsize=64)
def build_rule(N: int, s: float, spec: QuadratureSpec, r_inner: float, R: float,
               extra: Tuple[float, ...] = (), half: bool = True) -> QuadratureRule:
    directions, dir_weights = gauge_sphere_rule(N, spec.polar_points, spec.azimuth_points, half)
    x, wx = np.polynomial.legendre.leggauss(spec.points_per_annulus)
    radii = annulus_radii(r_inner, R, spec.annuli_per_decade, extra)
    annuli: List[AnnulusRule] = []
    for lo, hi in zip(radii[:-1], radii[1:]):
        a, b = math.log(lo), math.log(hi)
        rho = 0.5 * (a + b) + 0.5 * (b - a) * x
        r = np.exp(rho)
        annuli.append(AnnulusRule(float(lo), float(hi), r, 0.5 * (b - a) * wx * r ** (-2.0 * s)))
    return QuadratureRule(tuple(annuli), directions, dir_weights, half)


@dataclass
class FracSublapResult:
    """Breakdown of one evaluation; partials are per-annulus contributions to the kernel integral"""
    value: float
    kernel_integral: float
    inner: float
    partials: List[float] = field(default_factory=list)
    tail_bound: float = 0.0
    inner_radius: float = 0.0
    tail_radius: float = 0.0

    def to_dict(self) -> dict:
        return {
            'value': self.value,
            'kernel_integral': self.kernel_integral,
            'inner': self.inner,
            'tail_bound': self.tail_bound,
            'inner_radius': self.inner_radius,
            'tail_radius': self.tail_radius,
            'annuli': len(self.partials),
        }


def _sup_bound(u) -> float:
    bound = getattr(u, 'sup_abs', None)
    if bound is None or not math.isfinite(bound):
        raise DomainError(f"{getattr(u, 'name', 'field')} has no finite global bound; the nonlocal term needs a bounded function")
    return float(bound)


def prepare_rule(params: OperatorParams, spec: QuadratureSpec, min_radius: float = 0.0,
                 extra: Tuple[float, ...] = (), half: bool = True) -> QuadratureRule:
    """Validate the tail and build (or fetch) the rule; min_radius is the field's resolution floor"""
    r_inner = max(spec.inner_radius, float(min_radius))
    R = spec.resolved_tail_radius(params)
    if R <= r_inner:
        raise ConfigurationError('tail_radius', f"{R:g} does not exceed the inner radius {r_inner:g}")
    relative_tail = tail_bound(R, params, 1.0) / params.c_norm
    if relative_tail > spec.tail_tolerance * (1.0 + 1e-12):
        raise ConfigurationError(
            'tail_radius',
            f"tail bound {relative_tail:.3g} exceeds tail_tolerance {spec.tail_tolerance:.3g} at R = {R:g}",
        )
    return build_rule(params.N, float(params.s), spec, r_inner, R, tuple(extra), half)


def _min_radius(u) -> float:
    return float(getattr(u, 'min_radius', 0.0))


def _checked(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise DomainError("field returned non-finite values inside the quadrature")
    return values


def symmetric_partials(u, coords: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Per-annulus sums of w (u(xi o eta) + u(xi o eta^-1) - 2 u(xi)) over the stored half rule, (M, n_annuli)"""
    coords = np.atleast_2d(coords)
    centre = _checked(u.values(coords))
    partials = np.empty((coords.shape[0], len(rule.annuli)))
    for k in range(len(rule.annuli)):
        eta, w = rule.nodes(k)
        plus = _checked(u.values(compose_coords(coords[:, None, :], eta[None, :, :])))
        minus = _checked(u.values(compose_coords(coords[:, None, :], -eta[None, :, :])))
        second = plus + minus - 2.0 * centre[:, None]
        partials[:, k] = np.sum(second * w[None, :], axis=-1)
    return partials


def _evaluate_chunk(u, coords: np.ndarray, params: OperatorParams, rule: QuadratureRule) -> List[FracSublapResult]:
    partials = symmetric_partials(u, coords, rule)
    r_inner = rule.annuli[0].lower
    R = rule.annuli[-1].upper
    inner = np.atleast_1d(_inner_terms(u, coords, r_inner, params))
    centre = np.atleast_1d(u.values(coords))
    bound = _sup_bound(u)
    results = []
    for m in range(coords.shape[0]):
        row = [float(v) for v in partials[m]]
        integral = 2.0 * math.fsum(row)
        total = math.fsum([integral, float(inner[m])])
        results.append(FracSublapResult(
            value=-0.5 * params.c_norm * total,
            kernel_integral=integral,
            inner=float(inner[m]),
            partials=[2.0 * v for v in row],
            tail_bound=tail_bound(R, params, bound + abs(float(centre[m]))),
            inner_radius=r_inner,
            tail_radius=R,
        ))
    return results


def frac_sublap_detailed(u, xi: GroupPoint, params: OperatorParams, spec: QuadratureSpec) -> FracSublapResult:
    _sup_bound(u)
    rule = prepare_rule(params, spec, _min_radius(u))
    return _evaluate_chunk(u, xi.to_array()[None, :], params, rule)[0]


def frac_sublap(u, xi: GroupPoint, params: OperatorParams, spec: QuadratureSpec) -> float:
    """(-Delta_H)^s u(xi); non-negative where u attains a global maximum"""
    return frac_sublap_detailed(u, xi, params, spec).value


def frac_sublap_many(u, points, params: OperatorParams, spec: QuadratureSpec, threads: int = 1) -> np.ndarray:
    """Vectorized evaluation at many points

    Points are cut into fixed chunks; the thread count only changes scheduling.
    """
    _sup_bound(u)
    coords = np.atleast_2d(as_coords(points))
    rule = prepare_rule(params, spec, _min_radius(u))
    chunks = [coords[i:i + POINT_CHUNK] for i in range(0, coords.shape[0], POINT_CHUNK)]

    def run(chunk):
        return [r.value for r in _evaluate_chunk(u, chunk, params, rule)]

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(chunk) for chunk in chunks]
    return np.array([v for part in parts for v in part], dtype=float)


def frac_sublap_compensated(u, xi: GroupPoint, params: OperatorParams, spec: QuadratureSpec) -> float:
    """One-sided form -c int (u(xi o eta) - u(xi) - 1{|eta|<=1} <(grad_H u, u_t)(xi), eta>) |eta|^(-Q-2s) d eta

    With prefactor c this equals the symmetric form with prefactor c/2: the compensator is
    odd in eta and the remaining one-sided integrand folds onto the second difference.
    """
    _sup_bound(u)
    rule = prepare_rule(params, spec, _min_radius(u), extra=(1.0,), half=False)
    coords = xi.to_array()[None, :]
    centre = float(u.values(coords)[0])
    slope = np.concatenate([horizontal_gradient_coords(u, coords)[0], u.gradient_at(coords)[0, -1:]])
    partials = []
    for k, annulus in enumerate(rule.annuli):
        eta, w = rule.nodes(k)
        one_sided = _checked(u.values(compose_coords(coords, eta))) - centre
        if annulus.upper <= 1.0:
            one_sided = one_sided - eta @ slope
        partials.append(float(np.sum(one_sided * w)))
    inner = float(_inner_terms(u, coords, rule.annuli[0].lower, params)[0])
    return -params.c_norm * math.fsum(partials + [0.5 * inner])


def gaussian_gauge_reference(params: OperatorParams) -> float:
    """Closed form of (-Delta_H)^s exp(-|xi|^4) at the origin: -(c sigma / 4) Gamma(-s/2)"""
    sigma = gauge_sphere_constant(params.N)
    return -0.25 * params.c_norm * sigma * float(special.gamma(-0.5 * params.s))
