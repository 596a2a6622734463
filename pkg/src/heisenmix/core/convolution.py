"""
Convolution Module

Sup- and inf-convolutions of grid fields with the quartic gauge kernel:

    u^eps(xi) = max_eta [u(eta) - |eta^-1 o xi|^4 / eps]
    u_eps(xi) = min_eta [u(eta) + |eta^-1 o xi|^4 / eps]

over the nodes eta of the field's grid. A node can only beat eta = xi when
|eta^-1 o xi|^4 <= eps * osc(u), so the scan is limited to a window of grid offsets
covering that gauge radius; the restriction does not change the result.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from .errors import DomainError
from .fields import FieldWithExterior, Grid
from .hcalculus import linear_combination
from .hgroup import gauge_distance_coords


@dataclass(frozen=True, eq=False)
class ConvolvedField(FieldWithExterior):
    """A regularized field plus, per node, the kernel value |eta*^-1 o xi|^4 of its optimizer"""
    witness: Optional[np.ndarray] = None
    eps: float = 0.0


def _window(grid: Grid, rho: float) -> Tuple[int, ...]:
    """Offsets per axis that contain every node within gauge distance rho"""
    N = grid.N
    lo, hi = np.array(grid.lower), np.array(grid.upper)
    reach = np.maximum(np.abs(lo), np.abs(hi))[:2 * N]
    z_max = float(np.sqrt(np.sum(reach ** 2)))
    h = grid.spacing
    horizontal = [math.ceil(rho / h[k] + 1e-9) for k in range(2 * N)]
    vertical = math.ceil((rho * rho + 2.0 * rho * z_max) / h[-1] + 1e-9)
    return tuple(min(n, size - 1) for n, size in zip(horizontal + [vertical], grid.shape))


def _offsets(window: Tuple[int, ...]) -> Iterator[Tuple[int, ...]]:
    ranges = [range(-w, w + 1) for w in window]
    for offset in itertools.product(*ranges):
        if any(offset):
            yield offset


def _slices(offset: Tuple[int, ...], shape: Tuple[int, ...]):
    target, source = [], []
    for o, n in zip(offset, shape):
        if o >= 0:
            target.append(slice(0, n - o))
            source.append(slice(o, n))
        else:
            target.append(slice(-o, n))
            source.append(slice(0, n + o))
    return tuple(target), tuple(source)


def sup_convolution(u: FieldWithExterior, eps: float) -> ConvolvedField:
    if not (math.isfinite(eps) and eps > 0):
        raise DomainError(f"eps must be positive, got {eps}")
    grid = u.grid
    values = u.values_on_nodes.reshape(grid.shape)
    best = values.copy()
    witness = np.zeros(grid.shape)
    osc = u.oscillation()
    if osc > 0:
        limit = eps * osc
        nodes = grid.nodes.reshape(grid.shape + (grid.dim,))
        for offset in _offsets(_window(grid, limit ** 0.25)):
            target, source = _slices(offset, grid.shape)
            kernel = gauge_distance_coords(nodes[target], nodes[source]) ** 4
            candidate = values[source] - kernel / eps
            better = (kernel <= limit) & (candidate > best[target])
            if np.any(better):
                best[target] = np.where(better, candidate, best[target])
                witness[target] = np.where(better, kernel, witness[target])
    return ConvolvedField(grid, best.ravel(), u.exterior, name=f"sup_conv({u.name})",
                          witness=witness.ravel(), eps=float(eps))


def inf_convolution(u: FieldWithExterior, eps: float) -> ConvolvedField:
    """-sup_convolution(-u)"""
    negated = u.map_values(np.negative, exterior=linear_combination([(-1.0, u.exterior)]))
    upper = sup_convolution(negated, eps)
    return ConvolvedField(u.grid, -upper.values_on_nodes, u.exterior, name=f"inf_conv({u.name})",
                          witness=upper.witness, eps=float(eps))
