"""
Horizontal Calculus Module

Vector fields X_i = d/dx_i + 2 y_i d/dt, Y_i = d/dy_i - 2 x_i d/dt, the sigma frame,
horizontal gradients and the symmetrized horizontal Hessian sigma D^2u sigma^T.

Functions are passed around as `SmoothFn` records: a vectorized evaluator over flat
coordinate arrays plus optional exact Euclidean derivatives. Missing derivatives fall
back to central differences with steps eps^(1/3)(1+|c|) and eps^(1/4)(1+|c|).
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError
from .hgroup import GroupPoint, as_coords, compose_coords, dilate_coords


Evaluator = Callable[[np.ndarray], np.ndarray]
PointLike = Union[GroupPoint, np.ndarray]

EPS = float(np.finfo(float).eps)
FIRST_STEP = EPS ** (1.0 / 3.0)
SECOND_STEP = EPS ** 0.25


def _steps(coords: np.ndarray, base: float) -> np.ndarray:
    """Per-coordinate steps rounded so that (c + h) - c == h exactly"""
    h = base * (1.0 + np.abs(coords))
    return (coords + h) - coords


@dataclass(frozen=True)
class SmoothFn:
    """Closed-form function on H^N with optional exact Euclidean derivatives

    evaluator maps (..., 2N+1) -> (...); gradient maps to (..., 2N+1); hessian maps
    to (..., 2N+1, 2N+1). sup_abs is a known bound on |u| over all of H^N, or None.
    """
    evaluator: Evaluator
    gradient: Optional[Evaluator] = None
    hessian: Optional[Evaluator] = None
    sup_abs: Optional[float] = None
    name: str = "anonymous"

    @property
    def min_radius(self) -> float:
        # closed forms resolve every scale
        return 0.0

    def __call__(self, point: PointLike):
        values = self.values(as_coords(point))
        return float(values) if isinstance(point, GroupPoint) else values

    def values(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(coords, dtype=float)), dtype=float)

    def gradient_at(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(coords), dtype=float)
        return fd_gradient(self.values, coords)

    def hessian_at(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(coords), dtype=float)
        return fd_hessian(self.values, coords)


def fd_gradient(values: Evaluator, coords: np.ndarray) -> np.ndarray:
    """Central-difference Euclidean gradient"""
    coords = np.asarray(coords, dtype=float)
    d = coords.shape[-1]
    h = _steps(coords, FIRST_STEP)
    grad = np.empty(coords.shape, dtype=float)
    for k in range(d):
        shift = np.zeros_like(coords)
        shift[..., k] = h[..., k]
        grad[..., k] = (values(coords + shift) - values(coords - shift)) / (2.0 * h[..., k])
    return grad


def fd_hessian(values: Evaluator, coords: np.ndarray) -> np.ndarray:
    """Central-difference Euclidean Hessian, symmetric by construction"""
    coords = np.asarray(coords, dtype=float)
    d = coords.shape[-1]
    h = _steps(coords, SECOND_STEP)
    center = values(coords)
    hess = np.empty(coords.shape + (d,), dtype=float)
    for k in range(d):
        ek = np.zeros_like(coords)
        ek[..., k] = h[..., k]
        hess[..., k, k] = (values(coords + ek) - 2.0 * center + values(coords - ek)) / h[..., k] ** 2
        for j in range(k):
            ej = np.zeros_like(coords)
            ej[..., j] = h[..., j]
            mixed = (values(coords + ek + ej) - values(coords + ek - ej)
                     - values(coords - ek + ej) + values(coords - ek - ej))
            hess[..., k, j] = hess[..., j, k] = mixed / (4.0 * h[..., k] * h[..., j])
    return hess


@dataclass(frozen=True)
class SigmaFrame:
    """sigma(xi): rows are the coefficients of X_1..X_N, Y_1..Y_N"""
    matrix: np.ndarray

    @property
    def N(self) -> int:
        return self.matrix.shape[0] // 2


@dataclass(frozen=True)
class HorizontalHessian:
    """Symmetrized 2N x 2N horizontal Hessian"""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise DomainError(f"horizontal Hessian must be 2N x 2N, got shape {m.shape}")
        object.__setattr__(self, 'matrix', 0.5 * (m + m.T))

    @property
    def N(self) -> int:
        return self.matrix.shape[0] // 2

    def trace(self) -> float:
        return float(np.trace(self.matrix))


def sigma_coords(coords: np.ndarray) -> np.ndarray:
    """Batched sigma frames, shape (..., 2N, 2N+1)"""
    coords = np.asarray(coords, dtype=float)
    d = coords.shape[-1]
    N = (d - 1) // 2
    frame = np.zeros(coords.shape[:-1] + (2 * N, d), dtype=float)
    idx = np.arange(N)
    frame[..., idx, idx] = 1.0
    frame[..., N + idx, N + idx] = 1.0
    frame[..., :N, -1] = 2.0 * coords[..., N:2 * N]
    frame[..., N:, -1] = -2.0 * coords[..., :N]
    return frame


def sigma_at(xi: GroupPoint) -> SigmaFrame:
    return SigmaFrame(sigma_coords(xi.to_array()))


def degeneracy_matrix(xi: GroupPoint) -> np.ndarray:
    """A = sigma^T sigma, positive semi-definite with a kernel direction"""
    s = sigma_coords(xi.to_array())
    return s.T @ s


def conjugate_by_sigma(coords: np.ndarray, euclidean_hessian: np.ndarray) -> np.ndarray:
    """Sym(sigma D^2 sigma^T) for batched Hessians"""
    s = sigma_coords(coords)
    h = s @ euclidean_hessian @ np.swapaxes(s, -1, -2)
    return 0.5 * (h + np.swapaxes(h, -1, -2))


def horizontal_gradient_coords(u, coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    return np.einsum('...ij,...j->...i', sigma_coords(coords), u.gradient_at(coords))


def horizontal_hessian_coords(u, coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    return conjugate_by_sigma(coords, u.hessian_at(coords))


def horizontal_gradient(u, xi: GroupPoint) -> np.ndarray:
    return horizontal_gradient_coords(u, xi.to_array())


def horizontal_hessian(u, xi: GroupPoint) -> HorizontalHessian:
    return HorizontalHessian(horizontal_hessian_coords(u, xi.to_array()))


def sublaplacian_coords(u, coords: np.ndarray) -> np.ndarray:
    return np.trace(horizontal_hessian_coords(u, coords), axis1=-2, axis2=-1)


def sublaplacian(u, xi: GroupPoint) -> float:
    return float(sublaplacian_coords(u, xi.to_array()))


def _flow(coords: np.ndarray, direction: int, step: np.ndarray) -> np.ndarray:
    """coords o (step e_direction): the flow of the left-invariant field for time step"""
    delta = np.zeros(coords.shape, dtype=float)
    delta[..., direction] = step
    return compose_coords(coords, delta)


def vector_field_derivative(u, coords: np.ndarray, direction: int) -> np.ndarray:
    """X_i u (direction i < N) or Y_i u (direction N + i) by central differences along the flow"""
    coords = np.asarray(coords, dtype=float)
    h = FIRST_STEP * (1.0 + np.max(np.abs(coords), axis=-1))
    return (u.values(_flow(coords, direction, h)) - u.values(_flow(coords, direction, -h))) / (2.0 * h)


def nested_vector_field_derivative(u, coords: np.ndarray, outer: int, inner: int) -> np.ndarray:
    """V_outer V_inner u by nested central differences along the group flows"""
    coords = np.asarray(coords, dtype=float)
    a = SECOND_STEP * (1.0 + np.max(np.abs(coords), axis=-1))
    plus = vector_field_derivative(u, _flow(coords, outer, a), inner)
    minus = vector_field_derivative(u, _flow(coords, outer, -a), inner)
    return (plus - minus) / (2.0 * a)


def commutator_defect_coords(u, coords: np.ndarray, index: int = 0) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    N = (coords.shape[-1] - 1) // 2
    if not 0 <= index < N:
        raise DomainError(f"commutator index must lie in [0, {N}), got {index}")
    xy = nested_vector_field_derivative(u, coords, index, N + index)
    yx = nested_vector_field_derivative(u, coords, N + index, index)
    return xy - yx + 4.0 * u.gradient_at(coords)[..., -1]


def commutator_defect(u, xi: GroupPoint, index: int = 0) -> float:
    """(X_i Y_i u - Y_i X_i u + 4 du/dt)(xi); vanishes up to differencing error"""
    return float(commutator_defect_coords(u, xi.to_array(), index))


def translate(u: SmoothFn, a: GroupPoint) -> SmoothFn:
    """Left translate xi -> u(a o xi); the map is affine in xi so derivatives pull back by its Jacobian"""
    shift = a.to_array()
    d = shift.size
    N = a.N
    jac = np.eye(d)
    jac[-1, :N] = 2.0 * shift[N:2 * N]
    jac[-1, N:2 * N] = -2.0 * shift[:N]

    def evaluator(coords):
        return u.values(compose_coords(shift, coords))

    def gradient(coords):
        return u.gradient_at(compose_coords(shift, coords)) @ jac

    def hessian(coords):
        return jac.T @ u.hessian_at(compose_coords(shift, coords)) @ jac

    return SmoothFn(evaluator, gradient, hessian, sup_abs=u.sup_abs, name=f"translate({u.name})")


def dilated(u: SmoothFn, lam: float) -> SmoothFn:
    """xi -> u(Phi_lam xi)"""
    if lam <= 0:
        raise DomainError(f"dilation factor must be positive, got {lam}")

    def scale(coords):
        s = np.full(coords.shape[-1], float(lam))
        s[-1] = lam * lam
        return s

    def evaluator(coords):
        return u.values(dilate_coords(lam, coords))

    def gradient(coords):
        return u.gradient_at(dilate_coords(lam, coords)) * scale(coords)

    def hessian(coords):
        s = scale(coords)
        return u.hessian_at(dilate_coords(lam, coords)) * np.outer(s, s)

    return SmoothFn(evaluator, gradient, hessian, sup_abs=u.sup_abs, name=f"dilate({u.name},{lam:g})")


def linear_combination(terms: Sequence[Tuple[float, SmoothFn]]) -> SmoothFn:
    """sum_k a_k u_k with derivatives combined term by term"""
    terms = [(float(a), fn) for a, fn in terms]
    bounds = [fn.sup_abs for _, fn in terms]
    bound = None if any(b is None for b in bounds) else sum(abs(a) * b for (a, _), b in zip(terms, bounds))

    def evaluator(coords):
        return sum(a * fn.values(coords) for a, fn in terms)

    def gradient(coords):
        return sum(a * fn.gradient_at(coords) for a, fn in terms)

    def hessian(coords):
        return sum(a * fn.hessian_at(coords) for a, fn in terms)

    name = " + ".join(f"{a:g}*{fn.name}" for a, fn in terms)
    return SmoothFn(evaluator, gradient, hessian, sup_abs=bound, name=name)
