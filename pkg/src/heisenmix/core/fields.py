"""
Grid Fields Module

Axis-aligned solver grids over a gauge ball and fields sampled on them.

A `FieldWithExterior` holds values on every box node (nodes outside the domain carry the
exterior data) and answers point queries everywhere: multilinear interpolation inside
the box, the closed-form exterior rule outside it. Derivatives use central differences
with the grid spacing, so at nodes they coincide with the solver's stencils.
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DomainError
from .hgroup import GaugeBall, as_coords


@dataclass(frozen=True)
class Grid:
    """Box [lower, upper] with `shape` nodes per axis and the interior mask of `ball`"""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    shape: Tuple[int, ...]
    ball: GaugeBall

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        shape = tuple(int(n) for n in self.shape)
        d = 2 * self.ball.N + 1
        if not (len(lower) == len(upper) == len(shape) == d):
            raise DomainError(f"grid needs {d} axes, got {len(lower)}, {len(upper)}, {len(shape)}")
        if any(n < 3 for n in shape):
            raise DomainError(f"every axis needs at least 3 nodes, got {shape}")
        if any(not hi > lo for lo, hi in zip(lower, upper)):
            raise DomainError("grid box must have upper > lower on every axis")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'shape', shape)

    @classmethod
    def covering(cls, ball: GaugeBall, h_xy: float, h_t: Optional[float] = None) -> 'Grid':
        """Grid with spacing h_xy (and h_t = h_xy^2 unless given) whose box covers the
        ball plus one layer of nodes, centred on the ball's centre"""
        if h_xy <= 0:
            raise DomainError(f"spacing must be positive, got {h_xy}")
        h_t = h_xy * h_xy if h_t is None else h_t
        lo, hi = ball.coordinate_extent()
        centre = ball.center.to_array()
        steps = np.full(centre.size, float(h_xy))
        steps[-1] = h_t
        halves = np.ceil((hi - centre) / steps - 1e-9).astype(int) + 1
        lower = centre - halves * steps
        upper = centre + halves * steps
        return cls(tuple(lower), tuple(upper), tuple(int(n) for n in 2 * halves + 1), ball)

    @classmethod
    def from_shape(cls, ball: GaugeBall, shape: Tuple[int, ...]) -> 'Grid':
        """Grid with the given node counts spanning exactly the ball's coordinate extent"""
        lo, hi = ball.coordinate_extent()
        return cls(tuple(lo), tuple(hi), tuple(shape), ball)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def N(self) -> int:
        return self.ball.N

    @cached_property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / (np.array(self.shape) - 1)

    @property
    def h_xy(self) -> float:
        return float(self.spacing[0])

    @property
    def h_t(self) -> float:
        return float(self.spacing[-1])

    @property
    def parabolic_ratio(self) -> float:
        """h_t / h_xy^2; 1 on parabolic grids"""
        return self.h_t / self.h_xy ** 2

    @property
    def is_parabolic(self) -> bool:
        return math.isclose(self.parabolic_ratio, 1.0, rel_tol=1e-9)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.shape))

    @cached_property
    def nodes(self) -> np.ndarray:
        """All node coordinates, (size, dim), C order"""
        mesh = np.meshgrid(*self.axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return self.ball.contains_coords(self.nodes)

    @cached_property
    def interior(self) -> np.ndarray:
        """Flat indices of nodes strictly inside the ball"""
        return np.flatnonzero(self.interior_mask)

    @cached_property
    def strides(self) -> np.ndarray:
        return np.array([int(np.prod(self.shape[k + 1:])) for k in range(self.dim)])

    def multi_index(self, flat: np.ndarray) -> np.ndarray:
        return np.stack(np.unravel_index(flat, self.shape), axis=-1)

    def check_stencil_room(self) -> None:
        """Interior nodes need every neighbour (diagonals included) inside the box"""
        idx = self.multi_index(self.interior)
        if idx.size and (np.any(idx == 0) or np.any(idx == np.array(self.shape) - 1)):
            raise DomainError("interior nodes touch the grid box; enlarge the box or refine the grid")

    def contains_box(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        return np.all((coords >= np.array(self.lower)) & (coords <= np.array(self.upper)), axis=-1)

    def interpolation(self, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Multilinear interpolation corners and weights for points inside the box

        Returns flat node indices and weights, both (..., 2^dim).
        """
        coords = np.asarray(coords, dtype=float)
        shape = np.array(self.shape)
        pos = (coords - np.array(self.lower)) / self.spacing
        base = np.clip(np.floor(pos).astype(np.int64), 0, shape - 2)
        frac = pos - base
        corners = []
        weights = []
        for bits in itertools.product((0, 1), repeat=self.dim):
            offset = np.array(bits)
            corners.append((base + offset) @ self.strides)
            weights.append(np.prod(np.where(offset == 1, frac, 1.0 - frac), axis=-1))
        return np.stack(corners, axis=-1), np.stack(weights, axis=-1)

    def to_dict(self) -> dict:
        return {
            'lower': list(self.lower),
            'upper': list(self.upper),
            'shape': list(self.shape),
            'h_xy': self.h_xy,
            'h_t': self.h_t,
            'parabolic_ratio': self.parabolic_ratio,
            'interior_nodes': int(self.interior.size),
        }


@dataclass(frozen=True, eq=False)
class FieldWithExterior:
    """Samples on every node of `grid` plus the closed-form `exterior` used outside the box"""
    grid: Grid
    values_on_nodes: np.ndarray
    exterior: object
    name: str = "field"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values_on_nodes, dtype=float).ravel()
        if vals.size != self.grid.size:
            raise DomainError(f"field has {vals.size} samples for a grid of {self.grid.size} nodes")
        if not np.all(np.isfinite(vals)):
            raise DomainError("field samples must be finite")
        object.__setattr__(self, 'values_on_nodes', vals)

    @classmethod
    def from_functions(cls, grid: Grid, interior_fn, exterior, name: str = "field") -> 'FieldWithExterior':
        """interior_fn on interior nodes, the exterior rule on every other box node"""
        nodes = grid.nodes
        values = np.where(grid.interior_mask, interior_fn.values(nodes), exterior.values(nodes))
        return cls(grid, values, exterior, name)

    def with_values(self, values: np.ndarray, name: Optional[str] = None) -> 'FieldWithExterior':
        return FieldWithExterior(self.grid, values, self.exterior, name or self.name)

    def map_values(self, fn: Callable[[np.ndarray], np.ndarray], exterior=None, name: Optional[str] = None) -> 'FieldWithExterior':
        return FieldWithExterior(self.grid, fn(self.values_on_nodes), exterior or self.exterior, name or self.name)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values_on_nodes[self.grid.interior]

    @property
    def sup_abs(self) -> Optional[float]:
        ext = getattr(self.exterior, 'sup_abs', None)
        if ext is None:
            return None
        return max(float(np.max(np.abs(self.values_on_nodes))), float(ext))

    @property
    def min_radius(self) -> float:
        # below this radius the nonlocal term falls back to the grid Hessian
        return max(self.grid.h_xy, math.sqrt(self.grid.h_t))

    def __call__(self, point):
        coords = as_coords(point)
        values = self.values(coords)
        return float(values) if coords.ndim == 1 else values

    def values(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        flat = coords.reshape(-1, coords.shape[-1])
        out = np.empty(flat.shape[0])
        inside = self.grid.contains_box(flat)
        if np.any(inside):
            corners, weights = self.grid.interpolation(flat[inside])
            out[inside] = np.sum(self.values_on_nodes[corners] * weights, axis=-1)
        if not np.all(inside):
            out[~inside] = self.exterior.values(flat[~inside])
        return out.reshape(coords.shape[:-1])

    def gradient_at(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        h = self.grid.spacing
        grad = np.empty(coords.shape)
        for k in range(coords.shape[-1]):
            e = np.zeros(coords.shape[-1])
            e[k] = h[k]
            grad[..., k] = (self.values(coords + e) - self.values(coords - e)) / (2.0 * h[k])
        return grad

    def hessian_at(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        d = coords.shape[-1]
        h = self.grid.spacing
        centre = self.values(coords)
        hess = np.empty(coords.shape + (d,))
        for a in range(d):
            ea = np.zeros(d)
            ea[a] = h[a]
            hess[..., a, a] = (self.values(coords + ea) - 2.0 * centre + self.values(coords - ea)) / h[a] ** 2
            for b in range(a):
                eb = np.zeros(d)
                eb[b] = h[b]
                mixed = (self.values(coords + ea + eb) - self.values(coords + ea - eb)
                         - self.values(coords - ea + eb) + self.values(coords - ea - eb))
                hess[..., a, b] = hess[..., b, a] = mixed / (4.0 * h[a] * h[b])
        return hess

    def oscillation(self) -> float:
        return float(np.max(self.values_on_nodes) - np.min(self.values_on_nodes))
