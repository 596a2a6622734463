"""
Property Probes Module

Randomized property suites behind the `bench` command. Each suite draws its cases from
the supplied generator, measures the worst violation and reports it against a fixed
tolerance, so a run is reproducible from its seed.
"""

import itertools
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .fracsublap import OperatorParams, QuadratureSpec, frac_sublap, gaussian_gauge_reference
from .functions import parse_function
from .hcalculus import SmoothFn, commutator_defect_coords, sigma_coords
from .hgroup import (
    GroupPoint,
    compose_coords,
    gauge_norm_coords,
    inverse_coords,
    random_points,
)
from .pucci import Ellipticity, optimizer_matrix, pucci_minus, pucci_plus, random_admissible, random_symmetric


@dataclass
class ProbeResult:
    name: str
    passed: bool
    cases: int
    worst: float
    tolerance: float
    seconds: float

    def to_dict(self) -> dict:
        return {'name': self.name, 'passed': self.passed, 'cases': self.cases,
                'worst': self.worst, 'tolerance': self.tolerance, 'seconds': self.seconds}


def _timed(name: str, tolerance: float, body: Callable[[], tuple]) -> ProbeResult:
    start = time.perf_counter()
    worst, cases = body()
    return ProbeResult(name, bool(worst <= tolerance), int(cases), float(worst), tolerance,
                       time.perf_counter() - start)


def group_algebra(rng: np.random.Generator, N: int = 1, samples: int = 10_000) -> ProbeResult:
    """Associativity, inverse, identity, norm symmetry, dilation homogeneity and both
    cancellation identities xi0 o eta o (xi0* o eta^(+-1))^-1 = xi0 o xi0*^-1"""

    def body():
        a, b, c = (random_points(rng, samples, N, 10.0) for _ in range(3))
        scale = 1.0 + np.max(np.abs(np.concatenate([a, b, c], axis=-1)), axis=-1) ** 2
        origin = np.zeros_like(a)
        errors = [
            compose_coords(compose_coords(a, b), c) - compose_coords(a, compose_coords(b, c)),
            compose_coords(a, inverse_coords(a)),
            compose_coords(a, origin) - a,
            compose_coords(origin, a) - a,
        ]
        target = compose_coords(a, inverse_coords(b))
        for eta in (c, inverse_coords(c)):
            lhs = compose_coords(compose_coords(a, eta), inverse_coords(compose_coords(b, eta)))
            errors.append(lhs - target)
        worst = max(float(np.max(np.max(np.abs(e), axis=-1) / scale)) for e in errors)

        norms = gauge_norm_coords(a)
        worst = max(worst, float(np.max(np.abs(gauge_norm_coords(inverse_coords(a)) - norms) / (1.0 + norms))))
        lam = rng.uniform(0.1, 10.0, size=samples)
        scaled = a * lam[:, None]
        scaled[:, -1] = lam * lam * a[:, -1]
        dilated = gauge_norm_coords(scaled)
        worst = max(worst, float(np.max(np.abs(dilated - lam * norms) / (1.0 + lam * norms))))
        return worst, samples

    return _timed('group_algebra', 1e-12, body)


def _random_polynomial(rng: np.random.Generator, degree: int = 3) -> SmoothFn:
    """Random polynomial in (x, y, t) of total degree <= degree, coefficients in [-1, 1]"""
    powers = [p for p in itertools.product(range(degree + 1), repeat=3) if sum(p) <= degree]
    coeffs = rng.uniform(-1.0, 1.0, size=len(powers))

    def evaluator(coords):
        x, y, t = coords[..., 0], coords[..., 1], coords[..., 2]
        return sum(c * x ** i * y ** j * t ** k for c, (i, j, k) in zip(coeffs, powers))

    return SmoothFn(evaluator, name="polynomial")


def commutator(rng: np.random.Generator, functions: int = 10, points: int = 100) -> ProbeResult:
    """X_1 Y_1 u - Y_1 X_1 u + 4 u_t = 0 by nested differences along the group flows"""

    def body():
        worst = 0.0
        for _ in range(functions):
            u = _random_polynomial(rng)
            coords = random_points(rng, points, 1, 1.0)
            worst = max(worst, float(np.max(np.abs(commutator_defect_coords(u, coords)))))
        return worst, functions * points

    return _timed('commutator', 1e-4, body)


def degeneracy(rng: np.random.Generator, N: int = 1, samples: int = 1000) -> ProbeResult:
    """sigma^T sigma is positive semi-definite and singular"""

    def body():
        coords = random_points(rng, samples, N, 1.0)
        s = sigma_coords(coords)
        A = np.swapaxes(s, -1, -2) @ s
        dets = np.abs(np.linalg.det(A))
        low = np.linalg.eigvalsh(A)[:, 0]
        return max(float(np.max(dets)), float(np.max(np.maximum(-low, 0.0)))), samples

    return _timed('degeneracy', 1e-10, body)


def pucci(rng: np.random.Generator, e: Ellipticity, N: int = 1, pairs: int = 10_000,
          test_matrices: int = 20, admissible: int = 1000) -> ProbeResult:
    """Duality, subadditivity, monotonicity, optimizer dominance and the lambda = Lambda = 1 collapse"""
    n = 2 * N

    def body():
        A = random_symmetric(rng, n, pairs)
        B = random_symmetric(rng, n, pairs)
        worst = float(np.max(np.abs(pucci_plus(-A, e) + pucci_minus(A, e))))
        worst = max(worst, float(np.max(pucci_plus(A + B, e) - pucci_plus(A, e) - pucci_plus(B, e))))
        P = B @ B
        worst = max(worst, float(np.max(pucci_plus(A, e) - pucci_plus(A + P, e))))
        unit = Ellipticity(1.0, 1.0)
        worst = max(worst, float(np.max(np.abs(pucci_plus(A, unit) - np.trace(A, axis1=-2, axis2=-1)))))
        for M in random_symmetric(rng, n, test_matrices):
            best = float(np.sum(optimizer_matrix(M, e) * M))
            others = np.einsum('kij,ij->k', random_admissible(rng, n, e, admissible), M)
            # dominance is checked with its own slack of 1e-10
            worst = max(worst, float(np.max(others)) - best - 1e-10)
        return max(worst, 0.0), pairs + test_matrices * admissible

    return _timed('pucci', 1e-12, body)


def gaussian_reference(params: OperatorParams, spec: Optional[QuadratureSpec] = None) -> ProbeResult:
    """(-Delta_H)^s exp(-|xi|^4) at the origin against its closed form; exact zero on constants"""
    spec = spec or QuadratureSpec()

    def body():
        origin = GroupPoint.origin(params.N)
        zero = abs(frac_sublap(parse_function("const:3"), origin, params, spec))
        exact = gaussian_gauge_reference(params)
        value = frac_sublap(parse_function("gaussian_gauge"), origin, params, spec)
        return max(zero, abs(value - exact) / abs(exact)), 2

    return _timed('gaussian_reference', 1e-3, body)


SUITES: Dict[str, str] = {
    'group_algebra': "Group law identities on random triples",
    'commutator': "[X, Y] = -4 d/dt on random polynomials",
    'degeneracy': "sigma^T sigma singular and positive semi-definite",
    'pucci': "Extremal operator identities on random matrices",
    'gaussian_reference': "Quadrature against the closed form at the origin",
}


def get_suite_choices() -> List[str]:
    return list(SUITES.keys())


def run_suites(names: Sequence[str], seed: int, params: OperatorParams,
               spec: Optional[QuadratureSpec] = None,
               progress: Optional[Callable[[int, float], None]] = None) -> List[ProbeResult]:
    """Run the named suites in order, each from its own stream of `seed`"""
    results = []
    streams = np.random.SeedSequence(seed).spawn(len(names))
    for step, (name, stream) in enumerate(zip(names, streams), start=1):
        rng = np.random.default_rng(stream)
        if name == 'group_algebra':
            result = group_algebra(rng, params.N)
        elif name == 'commutator':
            result = commutator(rng)
        elif name == 'degeneracy':
            result = degeneracy(rng, params.N)
        elif name == 'pucci':
            result = pucci(rng, params.ellipticity, params.N)
        elif name == 'gaussian_reference':
            result = gaussian_reference(params, spec)
        else:
            raise KeyError(name)
        results.append(result)
        if progress is not None:
            progress(step, result.worst)
    return results
