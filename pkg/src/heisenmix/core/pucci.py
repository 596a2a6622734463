"""
Pucci Operators Module

Extremal operators M+ and M- on symmetric 2N x 2N matrices, the maximizing coefficient
matrix of the max form, and the linear operators L_gamma(M) = <gamma gamma^T, M>.

All functions accept a single matrix, a `HorizontalHessian`, or a stack of matrices
with shape (..., n, n).
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import DomainError
from .hcalculus import HorizontalHessian


MatrixLike = Union[HorizontalHessian, np.ndarray]

SYMMETRY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Ellipticity:
    """Ellipticity constants 0 < lam <= Lam"""
    lam: float
    Lam: float

    def __post_init__(self):
        lam, Lam = float(self.lam), float(self.Lam)
        if not (np.isfinite(lam) and np.isfinite(Lam)) or lam <= 0 or lam > Lam:
            raise DomainError(f"ellipticity requires 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})")
        object.__setattr__(self, 'lam', lam)
        object.__setattr__(self, 'Lam', Lam)


def _as_symmetric(M: MatrixLike) -> np.ndarray:
    m = np.asarray(M.matrix if isinstance(M, HorizontalHessian) else M, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DomainError(f"expected square matrices, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix entries must be finite")
    mt = np.swapaxes(m, -1, -2)
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 0.0)
    if m.size and float(np.max(np.abs(m - mt))) > SYMMETRY_TOLERANCE * scale:
        raise DomainError("matrix is not symmetric")
    return 0.5 * (m + mt)


def spectral_split(M: MatrixLike) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of the symmetrized input"""
    return np.linalg.eigh(_as_symmetric(M))


def pucci_plus(M: MatrixLike, e: Ellipticity):
    """Lam * (sum of eigenvalues >= 0) + lam * (sum of eigenvalues < 0)"""
    w, _ = spectral_split(M)
    out = np.sum(np.where(w >= 0, e.Lam * w, e.lam * w), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def pucci_minus(M: MatrixLike, e: Ellipticity):
    """Lam * (sum of eigenvalues <= 0) + lam * (sum of eigenvalues > 0)"""
    w, _ = spectral_split(M)
    out = np.sum(np.where(w <= 0, e.Lam * w, e.lam * w), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def optimizer_matrix(M: MatrixLike, e: Ellipticity) -> np.ndarray:
    """A* = Lam P+ + lam P-, so that tr(A* M) = M+(M) and spec(A*) lies in [lam, Lam]

    Zero eigenvalues go to P+.
    """
    w, v = spectral_split(M)
    weights = np.where(w >= 0, e.Lam, e.lam)
    a = (v * weights[..., None, :]) @ np.swapaxes(v, -1, -2)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def linear_L_gamma(gamma: np.ndarray, M: MatrixLike, e: Ellipticity) -> float:
    """<gamma gamma^T, M> for an admissible gamma (spectrum of gamma gamma^T in [lam, Lam])"""
    g = np.asarray(gamma, dtype=float)
    coeff = g @ g.T
    m = _as_symmetric(M)
    if coeff.shape != m.shape:
        raise DomainError(f"gamma gamma^T has shape {coeff.shape}, matrix has {m.shape}")
    spectrum = np.linalg.eigvalsh(coeff)
    slack = 1e-12 * max(1.0, e.Lam)
    if spectrum[0] < e.lam - slack or spectrum[-1] > e.Lam + slack:
        raise DomainError(
            f"spectrum of gamma gamma^T [{spectrum[0]:.6g}, {spectrum[-1]:.6g}] "
            f"is outside [{e.lam:g}, {e.Lam:g}]"
        )
    return float(np.sum(coeff * m))


def random_admissible(rng: np.random.Generator, n: int, e: Ellipticity, count: int = 1) -> np.ndarray:
    """Random symmetric matrices with spectrum uniformly drawn from [lam, Lam]"""
    q, _ = np.linalg.qr(rng.standard_normal((count, n, n)))
    w = rng.uniform(e.lam, e.Lam, size=(count, n))
    return (q * w[:, None, :]) @ np.swapaxes(q, -1, -2)


def random_symmetric(rng: np.random.Generator, n: int, count: int = 1, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(scale=scale, size=(count, n, n))
    return 0.5 * (a + np.swapaxes(a, -1, -2))
