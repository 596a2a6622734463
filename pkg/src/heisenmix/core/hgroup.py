"""
Heisenberg Group Module

Exact group arithmetic on H^N = R^(2N+1): group law, inverse, parabolic dilations,
the Koranyi gauge norm and gauge balls.

Two layers are provided. `GroupPoint` / `GaugeBall` are immutable values used at the
API surface; the `*_coords` functions work on float arrays of shape (..., 2N+1) laid
out as (x_1..x_N, y_1..y_N, t) and broadcast, which is what the quadrature and grid
code calls in its hot loops.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .errors import DomainError


ArrayLike = Union[np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class GroupPoint:
    """A point xi = (x, y, t) of H^N"""
    x: Tuple[float, ...]
    y: Tuple[float, ...]
    t: float

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        if len(x) == 0 or len(x) != len(y):
            raise DomainError(f"x and y must have the same positive length, got {len(x)} and {len(y)}")
        t = float(self.t)
        if not all(math.isfinite(v) for v in x + y + (t,)):
            raise DomainError("GroupPoint components must be finite")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 't', t)

    @property
    def N(self) -> int:
        return len(self.x)

    @classmethod
    def origin(cls, N: int = 1) -> 'GroupPoint':
        return cls((0.0,) * N, (0.0,) * N, 0.0)

    @classmethod
    def from_array(cls, values: ArrayLike) -> 'GroupPoint':
        """Build from the flat layout [x_1..x_N, y_1..y_N, t]"""
        arr = np.asarray(values, dtype=float).ravel()
        if arr.size < 3 or arr.size % 2 == 0:
            raise DomainError(f"flat point must have odd length 2N+1 >= 3, got {arr.size}")
        N = (arr.size - 1) // 2
        return cls(tuple(arr[:N]), tuple(arr[N:2 * N]), arr[-1])

    def to_array(self) -> np.ndarray:
        return np.array(self.x + self.y + (self.t,), dtype=float)

    def to_list(self) -> List[float]:
        """Flat serialization used in JSON and CSV outputs"""
        return list(self.x + self.y + (self.t,))


@dataclass(frozen=True)
class GaugeBall:
    """Open Koranyi ball {xi : |center^-1 o xi| < radius}"""
    center: GroupPoint
    radius: float

    def __post_init__(self):
        radius = float(self.radius)
        if not math.isfinite(radius) or radius <= 0:
            raise DomainError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, 'radius', radius)

    @property
    def N(self) -> int:
        return self.center.N

    def contains_coords(self, points: np.ndarray) -> np.ndarray:
        """Vectorized membership for an array of flat points"""
        return gauge_distance_coords(points, self.center.to_array()) < self.radius

    def coordinate_extent(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounds (lo, hi) of the ball in flat coordinates

        Horizontal coordinates stay within radius of the centre; the t coordinate of
        center o eta moves by at most r^2 + 2r(|x0|_1 + |y0|_1).
        """
        c = self.center.to_array()
        N = self.N
        r = self.radius
        half = np.full(2 * N + 1, r)
        half[-1] = r * r + 2.0 * r * float(np.abs(c[:2 * N]).sum())
        return c - half, c + half


@dataclass(frozen=True)
class HomogeneousDim:
    """Homogeneous dimension Q = 2N + 2 of H^N"""
    N: int
    Q: int = field(init=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, 'N', int(self.N))
        object.__setattr__(self, 'Q', 2 * int(self.N) + 2)


def _split(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    N = (points.shape[-1] - 1) // 2
    return points[..., :N], points[..., N:2 * N], points[..., -1]


def compose_coords(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Group law on flat arrays: (a.x+b.x, a.y+b.y, a.t+b.t+2<a.y,b.x>-2<a.x,b.y>)"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay, at = _split(a)
    bx, by, bt = _split(b)
    t = at + bt + 2.0 * np.sum(ay * bx, axis=-1) - 2.0 * np.sum(ax * by, axis=-1)
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.empty(shape, dtype=float)
    N = ax.shape[-1]
    out[..., :N] = ax + bx
    out[..., N:2 * N] = ay + by
    out[..., -1] = t
    return out


def inverse_coords(a: np.ndarray) -> np.ndarray:
    return -np.asarray(a, dtype=float)


def dilate_coords(lam: float, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    out = lam * a
    out[..., -1] = lam * lam * a[..., -1]
    return out


def gauge_norm_coords(a: np.ndarray) -> np.ndarray:
    """((|x|^2 + |y|^2)^2 + t^2)^(1/4), hypot keeps large t from overflowing"""
    a = np.asarray(a, dtype=float)
    x, y, t = _split(a)
    z2 = np.sum(x * x, axis=-1) + np.sum(y * y, axis=-1)
    return np.sqrt(np.hypot(z2, t))


def gauge_distance_coords(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Left-invariant gauge distance |b^-1 o a|"""
    return gauge_norm_coords(compose_coords(inverse_coords(b), a))


def compose(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    _same_dim(a, b)
    return GroupPoint.from_array(compose_coords(a.to_array(), b.to_array()))


def inverse(a: GroupPoint) -> GroupPoint:
    return GroupPoint(tuple(-v for v in a.x), tuple(-v for v in a.y), -a.t)


def dilate(lam: float, a: GroupPoint) -> GroupPoint:
    if not math.isfinite(lam) or lam <= 0:
        raise DomainError(f"dilation factor must be positive, got {lam}")
    return GroupPoint(tuple(lam * v for v in a.x), tuple(lam * v for v in a.y), lam * lam * a.t)


def gauge_norm(a: GroupPoint) -> float:
    return float(gauge_norm_coords(a.to_array()))


def gauge_distance(a: GroupPoint, b: GroupPoint) -> float:
    _same_dim(a, b)
    return gauge_norm(compose(inverse(b), a))


def ball_contains(ball: GaugeBall, a: GroupPoint) -> bool:
    # open ball: exact strict comparison on the computed distance
    return gauge_distance(a, ball.center) < ball.radius


def _same_dim(a: GroupPoint, b: GroupPoint) -> None:
    if a.N != b.N:
        raise DomainError(f"points live in different groups (N={a.N} vs N={b.N})")


def sphere_area(dim: int) -> float:
    """Surface measure of the unit Euclidean sphere S^(dim-1) in R^dim"""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def cos_power_integral(n: int) -> float:
    """Integral of cos(phi)^n over (-pi/2, pi/2)"""
    return float(math.sqrt(math.pi) * special.gamma((n + 1) / 2.0) / special.gamma(n / 2.0 + 1.0))


def gauge_ball_volume(N: int) -> float:
    """Lebesgue measure |B_1| of the unit gauge ball (pi^2/2 for N=1)"""
    return math.pi ** N / math.factorial(N) * cos_power_integral(N + 1)


def gauge_sphere_constant(N: int) -> float:
    """sigma_gauge with int_{|eta|>R} |eta|^(-Q-2s) d eta = sigma_gauge R^(-2s) / (2s)

    Equals Q |B_1|; in gauge-polar coordinates d eta = r^(Q-1) cos^(N-1)(phi) dr dphi domega.
    """
    return HomogeneousDim(N).Q * gauge_ball_volume(N)


def random_points(rng: np.random.Generator, count: int, N: int = 1, scale: float = 10.0) -> np.ndarray:
    """Uniform points with components in [-scale, scale], flat layout"""
    return rng.uniform(-scale, scale, size=(count, 2 * N + 1))


def as_coords(points: Union[GroupPoint, Iterable[GroupPoint], np.ndarray]) -> np.ndarray:
    """Normalize a point, a list of points or an array to a flat float array"""
    if isinstance(points, GroupPoint):
        return points.to_array()
    if isinstance(points, np.ndarray):
        return points.astype(float, copy=False)
    items = list(points)
    if items and isinstance(items[0], GroupPoint):
        return np.stack([p.to_array() for p in items])
    return np.asarray(items, dtype=float)
