"""
Barrier Module

The explicit barrier family phi_C on H^N, which depends on xi_1 only:

    phi_C = 2 - exp(-C x)                                         for x = xi_1 >= 0
    phi_C = 1/2 + 1/4 / (1 - C x) + 1/4 (sin 3Cx + cos sqrt(6) Cx)  for x < 0

The two branches meet with matching value, slope and curvature at x = 0, and for large
enough C the mixed operator pushes L phi_C below -1 on balls normalized to sit in
{xi_1 > 0}. This module evaluates the family, searches for such a C with a lattice
certificate, and splits L phi_C at a point into its local part and five integrals.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import DomainError, SearchExhausted
from .fracsublap import OperatorParams, QuadratureSpec, inner_moments, prepare_rule
from .hcalculus import SmoothFn
from .hgroup import GaugeBall, GroupPoint
from .mixedop import evaluate_L, evaluate_L_many


SQRT6 = math.sqrt(6.0)

# |phi_C| <= 2 on all of H^N for every C
BARRIER_BOUND = 2.0

DEFAULT_C0 = 1.0
DEFAULT_C_MAX = 2.0 ** 10
LATTICE_START = 16
LATTICE_MAX = 1024
MODULUS_TARGET = 0.1

# T1 and T2 partials above this (relative to the largest partial) count as sign violations
SIGN_TOLERANCE = 1e-10

ProgressCallback = Callable[[int, float], None]


def _right_branch(C: float, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    decay = np.exp(-C * x)
    return 2.0 - decay, C * decay, -C * C * decay


def _left_branch(C: float, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    q = 1.0 / (1.0 - C * x)
    a = 3.0 * C * x
    b = SQRT6 * C * x
    return (
        0.5 + 0.25 * q + 0.25 * (np.sin(a) + np.cos(b)),
        0.25 * C * q * q + 0.25 * (3.0 * C * np.cos(a) - SQRT6 * C * np.sin(b)),
        0.5 * C * C * q ** 3 + 0.25 * (-9.0 * C * C * np.sin(a) - 6.0 * C * C * np.cos(b)),
    )


def profile(C: float, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """phi_C, phi_C' and phi_C'' as functions of x = xi_1"""
    x = np.asarray(x, dtype=float)
    neg = x < 0
    right = _right_branch(C, np.where(neg, 0.0, x))
    left = _left_branch(C, np.where(neg, x, 0.0))
    return tuple(np.where(neg, l, r) for l, r in zip(left, right))


@dataclass(frozen=True)
class Barrier:
    """phi_C with exact Euclidean derivatives"""
    C: float

    def __post_init__(self):
        C = float(self.C)
        if not math.isfinite(C) or C <= 0:
            raise DomainError(f"barrier constant must be positive, got {self.C}")
        object.__setattr__(self, 'C', C)

    @cached_property
    def function(self) -> SmoothFn:
        C = self.C

        def evaluator(coords):
            return profile(C, coords[..., 0])[0]

        def gradient(coords):
            grad = np.zeros(coords.shape)
            grad[..., 0] = profile(C, coords[..., 0])[1]
            return grad

        def hessian(coords):
            hess = np.zeros(coords.shape + (coords.shape[-1],))
            hess[..., 0, 0] = profile(C, coords[..., 0])[2]
            return hess

        return SmoothFn(evaluator, gradient, hessian, sup_abs=BARRIER_BOUND, name=f"barrier({C:g})")


def barrier_eval(b: Barrier, xi: GroupPoint) -> float:
    return float(profile(b.C, xi.x[0])[0])


def branch_match_defect(C: float) -> Tuple[float, float, float]:
    """Jumps of (value, slope, curvature) across xi_1 = 0; all three vanish"""
    if C <= 0:
        raise DomainError(f"barrier constant must be positive, got {C}")
    right = _right_branch(C, 0.0)
    left = _left_branch(C, 0.0)
    return tuple(float(r - l) for r, l in zip(right, left))


def normalized_ball(R: float, N: int = 1) -> GaugeBall:
    """B_R((2R, 0, ..., 0)), which lies in {xi_1 > R}"""
    centre = GroupPoint((2.0 * R,) + (0.0,) * (N - 1), (0.0,) * N, 0.0)
    return GaugeBall(centre, R)


def _check_normalized(omega: GaugeBall) -> Tuple[float, float]:
    low = omega.center.x[0] - omega.radius
    if low < 0:
        raise DomainError(
            f"domain reaches xi_1 = {low:g} < 0; translate it into {{xi_1 >= 0}} first (see normalized_ball)"
        )
    return low, omega.center.x[0] + omega.radius


@dataclass
class BarrierCertificate:
    """Lattice certificate sup_Omega L phi_C <= certified_max"""
    C: float
    certified_max: float
    lattice_max: float
    modulus: float
    lattice_points: int
    spacing: float
    target: float
    history: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return self.certified_max <= self.target

    def to_dict(self) -> dict:
        return {
            'C': self.C,
            'certified_max': self.certified_max,
            'lattice_max': self.lattice_max,
            'modulus': self.modulus,
            'lattice_points': self.lattice_points,
            'spacing': self.spacing,
            'target': self.target,
            'satisfied': self.satisfied,
            'history': [list(pair) for pair in self.history],
        }


def _lattice(low: float, high: float, n: int, N: int) -> Tuple[np.ndarray, float]:
    """Cell centres of n equal cells of [low, high] on the xi_1 axis"""
    h = (high - low) / n
    coords = np.zeros((n, 2 * N + 1))
    coords[:, 0] = low + h * (np.arange(n) + 0.5)
    return coords, h


def certify(C: float, params: OperatorParams, omega: GaugeBall, spec: QuadratureSpec,
            target: float = -1.0, threads: int = 1) -> BarrierCertificate:
    """max of L phi_C over a 1-D lattice plus modulus * h / 2

    L phi_C is a function of xi_1 alone, so a lattice of cell centres on the xi_1 extent of
    Omega covers the whole ball. The lattice doubles until modulus * h < 0.1.
    """
    low, high = _check_normalized(omega)
    fn = Barrier(C).function
    n = LATTICE_START
    while True:
        coords, h = _lattice(low, high, n, params.N)
        values = evaluate_L_many(fn, coords, params, spec, threads=threads)
        if not np.all(np.isfinite(values)):
            raise DomainError(f"L phi_C produced non-finite values at C = {C:g}")
        modulus = float(np.max(np.abs(np.diff(values)))) / h if n > 1 else 0.0
        if modulus * h < MODULUS_TARGET or n >= LATTICE_MAX:
            break
        n *= 2
    lattice_max = float(np.max(values))
    return BarrierCertificate(
        C=float(C),
        certified_max=lattice_max + 0.5 * modulus * h,
        lattice_max=lattice_max,
        modulus=modulus,
        lattice_points=n,
        spacing=h,
        target=float(target),
    )


def find_C(params: OperatorParams, omega: GaugeBall, spec: QuadratureSpec, target: float = -1.0,
           C0: float = DEFAULT_C0, C_max: float = DEFAULT_C_MAX, bisection_steps: int = 6,
           threads: int = 1, progress: Optional[ProgressCallback] = None) -> BarrierCertificate:
    """Doubling from C0 then bisection for a C whose certificate reaches `target`

    Raises SearchExhausted carrying the best certificate when no C <= C_max works.
    """
    if C0 <= 0 or C_max < C0:
        raise DomainError(f"need 0 < C0 <= C_max, got C0={C0:g}, C_max={C_max:g}")
    _check_normalized(omega)
    history: List[Tuple[float, float]] = []
    step = 0

    def attempt(C: float) -> BarrierCertificate:
        nonlocal step
        cert = certify(C, params, omega, spec, target, threads)
        history.append((cert.C, cert.certified_max))
        step += 1
        if progress is not None:
            progress(step, cert.certified_max)
        return cert

    best = attempt(C0)
    if best.satisfied:
        best.history = history
        return best

    low, found = C0, None
    C = C0
    while C * 2.0 <= C_max * (1.0 + 1e-12):
        C *= 2.0
        cert = attempt(C)
        if cert.satisfied:
            found = cert
            break
        low = C
        if cert.certified_max < best.certified_max:
            best = cert

    if found is None:
        best.history = history
        raise SearchExhausted(
            f"no C <= {C_max:g} reached L phi_C <= {target:g}; best certified max {best.certified_max:.6g} at C = {best.C:g}",
            report=best,
        )

    high = found
    for _ in range(bisection_steps):
        mid = 0.5 * (low + high.C)
        cert = attempt(mid)
        if cert.satisfied:
            high = cert
        else:
            low = mid
    high.history = history
    return high


@dataclass
class BarrierDecomposition:
    """L phi_C(xi) = local + T1 + ... + T5

    T1: |eta| <= delta, second-order remainder phi(x + eta_1) - phi(x) - eta_1 phi'(x), plus
        the small-ball term. T2: |eta| > delta with eta_1 <= 0. T3: delta < |eta| <= 1 with
        eta_1 > 0. T4: the first-order compensator over delta < |eta| <= 1. T5: |eta| > 1
        with eta_1 > 0. All integrals carry the factor beta * c_norm.

    T1 and T2 are non-positive annulus by annulus once xi_1 >= delta: phi_C is concave and
    increasing on the right branch. sign_violations lists the annuli where that fails.
    """
    point: List[float]
    C: float
    delta: float
    local: float
    terms: Dict[str, float]
    near_partials: List[float]
    negative_partials: List[float]
    direct: float
    sign_tolerance: float = SIGN_TOLERANCE

    @property
    def total(self) -> float:
        return math.fsum([self.local] + list(self.terms.values()))

    @property
    def discrepancy(self) -> float:
        return abs(self.total - self.direct)

    @property
    def sign_violations(self) -> List[Tuple[str, int, float]]:
        """(term, annulus index, partial) for every T1 or T2 partial that is positive"""
        scale = max([1.0] + [abs(v) for v in self.near_partials + self.negative_partials])
        limit = self.sign_tolerance * scale
        return [(name, k, value)
                for name, partials in (('T1', self.near_partials), ('T2', self.negative_partials))
                for k, value in enumerate(partials) if value > limit]

    def rows(self) -> List[Tuple[str, float]]:
        return [('local', self.local)] + list(self.terms.items()) + [('total', self.total), ('direct', self.direct)]

    def to_dict(self) -> dict:
        return {
            'point': self.point,
            'C': self.C,
            'delta': self.delta,
            'local': self.local,
            'terms': dict(self.terms),
            'total': self.total,
            'direct': self.direct,
            'discrepancy': self.discrepancy,
            'near_partials': list(self.near_partials),
            'negative_partials': list(self.negative_partials),
            'sign_violations': [{'term': name, 'annulus': k, 'value': value}
                                for name, k, value in self.sign_violations],
        }


def barrier_decomposition(C: float, xi: GroupPoint, params: OperatorParams, spec: QuadratureSpec,
                          radius: float = 1.0) -> BarrierDecomposition:
    """Split L phi_C(xi) for xi_1 >= 0 with delta = min(1, radius)"""
    x = xi.x[0]
    if x < 0:
        raise DomainError(f"the decomposition needs xi_1 >= 0, got {x:g}")
    delta = min(1.0, float(radius))
    rule = prepare_rule(params, spec, 0.0, extra=(delta, 1.0), half=False)
    phi0, slope, curvature = (float(v) for v in profile(C, x))
    e = params.ellipticity
    local = params.alpha * (e.Lam if curvature >= 0 else e.lam) * curvature
    K = params.beta * params.c_norm

    m_h, _ = inner_moments(params.N, params.s, rule.annuli[0].lower)
    near, negative = [], []
    t3, t4, t5 = [], [], []
    for k, annulus in enumerate(rule.annuli):
        eta, w = rule.nodes(k)
        e1 = eta[:, 0]
        G = profile(C, x + e1)[0] - phi0
        if annulus.upper <= delta * (1.0 + 1e-12):
            near.append(K * float(np.sum(w * (G - e1 * slope))))
            continue
        negative.append(K * float(np.sum(np.where(e1 <= 0, w * G, 0.0))))
        positive = K * float(np.sum(np.where(e1 > 0, w * G, 0.0)))
        if annulus.upper <= 1.0 * (1.0 + 1e-12):
            t3.append(positive)
            t4.append(-K * float(np.sum(w * e1)) * slope)
        else:
            t5.append(positive)

    terms = {
        'T1': math.fsum(near + [0.5 * K * m_h * curvature]),
        'T2': math.fsum(negative),
        'T3': math.fsum(t3),
        'T4': math.fsum(t4),
        'T5': math.fsum(t5),
    }
    direct = evaluate_L(Barrier(C).function, xi, params, spec)
    return BarrierDecomposition(
        point=xi.to_list(),
        C=float(C),
        delta=delta,
        local=local,
        terms=terms,
        near_partials=near,
        negative_partials=negative,
        direct=direct,
    )
