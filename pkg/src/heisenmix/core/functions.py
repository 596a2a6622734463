"""
Closed-Form Function Registry

Named test functions, right-hand sides and exterior data for run configurations.
A config names a function as "name" or "name:value", e.g. "const:7", "gauge_pow:0.5",
"gaussian_gauge", "barrier:4".
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .barrier import Barrier
from .errors import ConfigurationError
from .hcalculus import SmoothFn


@dataclass
class FunctionSpec:
    """Registry entry for a closed-form function on H^N"""
    name: str
    description: str
    parameter: Optional[str]
    default: Optional[float]
    build: Callable[[Optional[float]], SmoothFn]


def _horizontal(coords: np.ndarray) -> np.ndarray:
    N = (coords.shape[-1] - 1) // 2
    return coords[..., :2 * N]


def _const(c: float) -> SmoothFn:
    return SmoothFn(
        lambda coords: np.full(coords.shape[:-1], c),
        lambda coords: np.zeros(coords.shape),
        lambda coords: np.zeros(coords.shape + (coords.shape[-1],)),
        sup_abs=abs(c),
        name=f"const:{c:g}",
    )


def _gauge_pow(p: float) -> SmoothFn:
    if p <= 0:
        raise ValueError("exponent must be positive")

    def evaluator(coords):
        z = _horizontal(coords)
        Z = np.sum(z * z, axis=-1)
        return np.hypot(Z, coords[..., -1]) ** (0.25 * p)

    return SmoothFn(evaluator, name=f"gauge_pow:{p:g}")


def _gaussian_gauge(_: Optional[float] = None) -> SmoothFn:
    """exp(-|xi|^4) = exp(-(|z|^4 + t^2))"""

    def parts(coords):
        z = _horizontal(coords)
        Z = np.sum(z * z, axis=-1)
        t = coords[..., -1]
        return z, Z, t, np.exp(-(Z * Z + t * t))

    def evaluator(coords):
        return parts(coords)[3]

    def inner_gradient(z, Z, t):
        g = np.empty(z.shape[:-1] + (z.shape[-1] + 1,))
        g[..., :-1] = 4.0 * Z[..., None] * z
        g[..., -1] = 2.0 * t
        return g

    def gradient(coords):
        z, Z, t, E = parts(coords)
        return -E[..., None] * inner_gradient(z, Z, t)

    def hessian(coords):
        z, Z, t, E = parts(coords)
        g = inner_gradient(z, Z, t)
        n = z.shape[-1]
        inner = np.zeros(z.shape[:-1] + (n + 1, n + 1))
        inner[..., :n, :n] = 4.0 * Z[..., None, None] * np.eye(n) + 8.0 * z[..., :, None] * z[..., None, :]
        inner[..., n, n] = 2.0
        return E[..., None, None] * (g[..., :, None] * g[..., None, :] - inner)

    return SmoothFn(evaluator, gradient, hessian, sup_abs=1.0, name="gaussian_gauge")


def _tanh_x(k: float) -> SmoothFn:
    def evaluator(coords):
        return np.tanh(k * coords[..., 0])

    def gradient(coords):
        grad = np.zeros(coords.shape)
        grad[..., 0] = k / np.cosh(k * coords[..., 0]) ** 2
        return grad

    def hessian(coords):
        hess = np.zeros(coords.shape + (coords.shape[-1],))
        th = np.tanh(k * coords[..., 0])
        hess[..., 0, 0] = -2.0 * k * k * th * (1.0 - th * th)
        return hess

    return SmoothFn(evaluator, gradient, hessian, sup_abs=1.0, name=f"tanh_x:{k:g}")


def _quadratic(_: Optional[float] = None) -> SmoothFn:
    """|x|^2 + |y|^2"""

    def evaluator(coords):
        z = _horizontal(coords)
        return np.sum(z * z, axis=-1)

    def gradient(coords):
        grad = 2.0 * coords
        grad[..., -1] = 0.0
        return grad

    def hessian(coords):
        d = coords.shape[-1]
        diag = np.full(d, 2.0)
        diag[-1] = 0.0
        return np.broadcast_to(np.diag(diag), coords.shape + (d,)).copy()

    return SmoothFn(evaluator, gradient, hessian, name="quadratic")


def _affine(k: float) -> SmoothFn:
    """k (x_1 + ... + y_N + t)"""
    return SmoothFn(
        lambda coords: k * np.sum(coords, axis=-1),
        lambda coords: np.full(coords.shape, k),
        lambda coords: np.zeros(coords.shape + (coords.shape[-1],)),
        name=f"affine:{k:g}",
    )


def _bump(a: float) -> SmoothFn:
    """a exp(1 - 1/(1 - |xi|^4)) inside the unit gauge ball, 0 outside; peak a at the origin"""

    def evaluator(coords):
        z = _horizontal(coords)
        Z = np.sum(z * z, axis=-1)
        q = Z * Z + coords[..., -1] ** 2
        inside = q < 1.0
        safe = np.where(inside, 1.0 - q, 1.0)
        return np.where(inside, a * np.exp(1.0 - 1.0 / safe), 0.0)

    return SmoothFn(evaluator, sup_abs=abs(a), name=f"bump:{a:g}")


def _barrier(C: float) -> SmoothFn:
    return Barrier(C).function


FUNCTION_SPECIFICATIONS: Dict[str, FunctionSpec] = {
    "const": FunctionSpec("const", "Constant c", "c", 0.0, _const),
    "gauge_pow": FunctionSpec("gauge_pow", "Gauge norm power |xi|^p (unbounded)", "p", 1.0, _gauge_pow),
    "gaussian_gauge": FunctionSpec("gaussian_gauge", "exp(-|xi|^4), exact derivatives", None, None, _gaussian_gauge),
    "tanh_x": FunctionSpec("tanh_x", "tanh(k x_1), bounded and monotone in x_1", "k", 1.0, _tanh_x),
    "quadratic": FunctionSpec("quadratic", "|x|^2 + |y|^2 (unbounded)", None, None, _quadratic),
    "affine": FunctionSpec("affine", "k times the coordinate sum (unbounded)", "k", 1.0, _affine),
    "bump": FunctionSpec("bump", "Smooth bump of height a on the unit gauge ball", "a", 1.0, _bump),
    "barrier": FunctionSpec("barrier", "Barrier phi_C", "C", 1.0, _barrier),
}


def get_function_choices() -> List[str]:
    return list(FUNCTION_SPECIFICATIONS.keys())


def get_function_description(name: str) -> str:
    spec = FUNCTION_SPECIFICATIONS.get(name)
    if spec is None:
        return "Unknown function"
    return spec.description


def parse_function(text: str, field: str = "function") -> SmoothFn:
    """Build the registry function named by "name" or "name:value" """
    if not isinstance(text, str) or not text.strip():
        raise ConfigurationError(field, f"expected a function name, got {text!r}")
    name, _, raw = text.strip().partition(':')
    spec = FUNCTION_SPECIFICATIONS.get(name)
    if spec is None:
        raise ConfigurationError(field, f"unknown function {name!r}; choose from {', '.join(get_function_choices())}")
    if spec.parameter is None:
        if raw:
            raise ConfigurationError(field, f"{name} takes no parameter")
        return spec.build(None)
    try:
        value = float(raw) if raw else spec.default
    except ValueError:
        raise ConfigurationError(field, f"{name} parameter {spec.parameter} must be a number, got {raw!r}")
    if not np.isfinite(value):
        raise ConfigurationError(field, f"{name} parameter {spec.parameter} must be finite")
    try:
        return spec.build(value)
    except ValueError as e:
        raise ConfigurationError(field, f"{name}:{raw}: {e}")
