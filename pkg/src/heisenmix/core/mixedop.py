"""
Mixed Operator Module

L u = alpha M+(D^2_{H,S} u) - beta (-Delta_H)^s u, pointwise and on solver grids.

Pointwise evaluation works for anything exposing values / gradient_at / hessian_at
(`SmoothFn` or `FieldWithExterior`). `GridOperator` assembles the same discretization once
for a fixed grid: central second-difference stencils for D^2, and a sparse interpolation
matrix for the nonlocal quadrature, so that the solver can apply L cheaply.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from .errors import DomainError
from .fields import FieldWithExterior, Grid
from .fracsublap import (
    POINT_CHUNK,
    OperatorParams,
    QuadratureRule,
    QuadratureSpec,
    frac_sublap_many,
    inner_moments,
    prepare_rule,
)
from .hcalculus import SmoothFn, horizontal_hessian_coords, sigma_coords
from .hgroup import GaugeBall, GroupPoint, as_coords, compose_coords, gauge_distance_coords
from .pucci import pucci_minus, pucci_plus


def local_term(u, coords: np.ndarray, params: OperatorParams, minus: bool = False) -> np.ndarray:
    """alpha M+-(D^2_{H,S} u) at each point"""
    coords = np.atleast_2d(coords)
    if params.alpha == 0:
        return np.zeros(coords.shape[0])
    hess = horizontal_hessian_coords(u, coords)
    extremal = pucci_minus if minus else pucci_plus
    return params.alpha * np.atleast_1d(extremal(hess, params.ellipticity))


def evaluate_L_many(u, points, params: OperatorParams, spec: QuadratureSpec,
                    threads: int = 1, minus: bool = False) -> np.ndarray:
    coords = np.atleast_2d(as_coords(points))
    nonlocal_part = frac_sublap_many(u, coords, params, spec, threads=threads)
    return local_term(u, coords, params, minus) - params.beta * nonlocal_part


def evaluate_L(u, xi: GroupPoint, params: OperatorParams, spec: QuadratureSpec) -> float:
    return float(evaluate_L_many(u, xi.to_array(), params, spec)[0])


def evaluate_L_minus(u, xi: GroupPoint, params: OperatorParams, spec: QuadratureSpec) -> float:
    """Companion operator with M- in the local term"""
    return float(evaluate_L_many(u, xi.to_array(), params, spec, minus=True)[0])


def spliced(u, phi: SmoothFn, xi: GroupPoint, radius: float) -> SmoothFn:
    """phi on the gauge ball B_radius(xi), u everywhere else"""
    if radius <= 0:
        raise DomainError(f"splice radius must be positive, got {radius}")
    centre = xi.to_array()

    def near(coords):
        return gauge_distance_coords(coords, centre) < radius

    def evaluator(coords):
        return np.where(near(coords), phi.values(coords), u.values(coords))

    def gradient(coords):
        return np.where(near(coords)[..., None], phi.gradient_at(coords), u.gradient_at(coords))

    def hessian(coords):
        return np.where(near(coords)[..., None, None], phi.hessian_at(coords), u.hessian_at(coords))

    bound = phi.sup_abs
    if bound is None:
        ball = GaugeBall(xi, radius)
        lo, hi = ball.coordinate_extent()
        samples = np.stack(np.meshgrid(*[np.linspace(a, b, 9) for a, b in zip(lo, hi)], indexing='ij'), -1)
        samples = samples.reshape(-1, centre.size)
        inside = samples[ball.contains_coords(samples)]
        # sampled, not certified; only feeds the reported tail bound
        bound = float(np.max(np.abs(phi.values(inside)))) if inside.size else abs(float(phi(xi)))
    outer = getattr(u, 'sup_abs', None)
    total = None if outer is None else max(float(outer), bound)
    return SmoothFn(evaluator, gradient, hessian, sup_abs=total, name=f"splice({getattr(u, 'name', 'u')},{phi.name})")


def evaluate_L_spliced(u, phi: SmoothFn, xi: GroupPoint, radius: float,
                       params: OperatorParams, spec: QuadratureSpec) -> float:
    """L applied to the test function phi touching at xi, spliced into u outside B_radius(xi)"""
    return evaluate_L(spliced(u, phi, xi, radius), xi, params, spec)


@dataclass
class ResidualField:
    """L u - f at the interior nodes of a grid"""
    grid: Grid
    coords: np.ndarray
    residual: np.ndarray

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    def rows(self) -> np.ndarray:
        return np.column_stack([self.coords, self.residual])


def residual_field(u: FieldWithExterior, f, params: OperatorParams, spec: QuadratureSpec,
                   threads: int = 1) -> ResidualField:
    """Pointwise re-evaluation of L u - f at every interior node"""
    coords = u.grid.nodes[u.grid.interior]
    values = evaluate_L_many(u, coords, params, spec, threads=threads) - f.values(coords)
    return ResidualField(u.grid, coords, values)


def gershgorin_weight(coeff: np.ndarray, spacing: np.ndarray) -> np.ndarray:
    """Per-node sum 2 B_aa / h_a^2 + sum_{a != b} |B_ab| / (h_a h_b) of the stencil of tr(B D^2)"""
    inv = 1.0 / spacing
    diag = 2.0 * np.einsum('naa,a->n', coeff, inv ** 2)
    off = np.abs(coeff) * np.outer(inv, inv)[None, :, :]
    off_sum = off.sum(axis=(1, 2)) - np.einsum('naa->n', off)
    return diag + off_sum


class GridOperator:
    """L discretized on the interior nodes of `grid`, with exterior data `g` outside Omega

    Box nodes outside Omega hold g; quadrature points outside the box read g in closed
    form. Below the grid resolution max(r0, h_xy, sqrt(h_t)) the nonlocal term uses the
    quadratic model built from the grid Hessian.
    """

    def __init__(self, grid: Grid, g, params: OperatorParams, spec: QuadratureSpec, threads: int = 1):
        grid.check_stencil_room()
        if getattr(g, 'sup_abs', None) is None:
            raise DomainError(f"exterior data {getattr(g, 'name', 'g')} must carry a finite bound")
        self.grid = grid
        self.g = g
        self.params = params
        self.spec = spec
        self.threads = max(1, int(threads))
        self.interior = grid.interior
        self.exterior_ids = np.flatnonzero(~grid.interior_mask)
        self.coords = grid.nodes[self.interior]
        self.boundary_values = g.values(grid.nodes)
        d = grid.dim
        self.pairs: List[Tuple[int, int]] = [(a, b) for a in range(d) for b in range(a, d)]
        self.stencils = self._build_stencils()
        touched = np.unique(np.concatenate([m.indices for m in self.stencils.values()]))
        # exterior nodes one stencil step from Omega
        self.rim_ids = touched[~grid.interior_mask[touched]]
        self.sigma = sigma_coords(self.coords)
        min_radius = max(grid.h_xy, math.sqrt(grid.h_t))
        self.rule: QuadratureRule = prepare_rule(params, spec, min_radius)
        self.inner_coeff = inner_coefficients(self.sigma, params, self.rule.annuli[0].lower)
        self.kernel_mass = self._kernel_mass()
        self.P, self.b_ext = self._assemble_nonlocal()

    @property
    def n_interior(self) -> int:
        return int(self.interior.size)

    def _build_stencils(self):
        grid = self.grid
        idx = self.interior
        n, size = idx.size, grid.size
        h = grid.spacing
        stride = grid.strides
        rows = np.arange(n)
        out = {}
        for a, b in self.pairs:
            if a == b:
                r = np.concatenate([rows, rows, rows])
                c = np.concatenate([idx + stride[a], idx, idx - stride[a]])
                v = np.concatenate([np.full(n, 1.0), np.full(n, -2.0), np.full(n, 1.0)]) / h[a] ** 2
            else:
                r = np.concatenate([rows] * 4)
                c = np.concatenate([idx + stride[a] + stride[b], idx + stride[a] - stride[b],
                                    idx - stride[a] + stride[b], idx - stride[a] - stride[b]])
                v = np.concatenate([np.full(n, 1.0), np.full(n, -1.0), np.full(n, -1.0), np.full(n, 1.0)])
                v = v / (4.0 * h[a] * h[b])
            out[(a, b)] = sparse.csr_matrix((v, (r, c)), shape=(n, size))
        return out

    def _kernel_mass(self) -> float:
        return rule_mass(self.rule)

    def _assemble_chunk(self, start: int, stop: int):
        grid = self.grid
        coords = self.coords[start:stop]
        m = coords.shape[0]
        rows, cols, data = [], [], []
        partials = np.zeros((m, len(self.rule.annuli)))
        for k in range(len(self.rule.annuli)):
            eta, w = self.rule.nodes(k)
            weights = np.broadcast_to(w[None, :], (m, w.size))
            row_ids = np.broadcast_to(np.arange(m)[:, None], (m, w.size))
            for sign in (1.0, -1.0):
                pts = compose_coords(coords[:, None, :], sign * eta[None, :, :])
                inside = grid.contains_box(pts)
                outside_vals = np.zeros(inside.shape)
                if not np.all(inside):
                    outside_vals[~inside] = self.g.values(pts[~inside])
                partials[:, k] += np.sum(outside_vals * weights, axis=-1)
                if np.any(inside):
                    corners, lin = grid.interpolation(pts[inside])
                    rows.append(np.repeat(row_ids[inside], corners.shape[-1]))
                    cols.append(corners.ravel())
                    data.append((lin * weights[inside][:, None]).ravel())
        block = sparse.coo_matrix(
            (np.concatenate(data) if data else np.zeros(0),
             (np.concatenate(rows) if rows else np.zeros(0, int), np.concatenate(cols) if cols else np.zeros(0, int))),
            shape=(m, grid.size),
        ).tocsr()
        b = np.array([math.fsum(row) for row in partials.tolist()])
        return block, b

    def _assemble_nonlocal(self):
        starts = list(range(0, self.n_interior, POINT_CHUNK))
        bounds = [(s, min(s + POINT_CHUNK, self.n_interior)) for s in starts]
        if self.threads > 1 and len(bounds) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                pieces = list(pool.map(lambda se: self._assemble_chunk(*se), bounds))
        else:
            pieces = [self._assemble_chunk(s, e) for s, e in bounds]
        if not pieces:
            return sparse.csr_matrix((0, self.grid.size)), np.zeros(0)
        P = sparse.vstack([block for block, _ in pieces], format='csr')
        return P, np.concatenate([b for _, b in pieces])

    def full_vector(self, interior_values: np.ndarray) -> np.ndarray:
        u = self.boundary_values.copy()
        u[self.interior] = interior_values
        return u

    def euclidean_hessians(self, u_box: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        hess = np.empty((self.n_interior, d, d))
        for (a, b), S in self.stencils.items():
            v = S @ u_box
            hess[:, a, b] = v
            hess[:, b, a] = v
        return hess

    def horizontal_hessians(self, u_box: np.ndarray) -> np.ndarray:
        h = self.sigma @ self.euclidean_hessians(u_box) @ np.swapaxes(self.sigma, -1, -2)
        return 0.5 * (h + np.swapaxes(h, -1, -2))

    def nonlocal_sum(self, u_box: np.ndarray) -> np.ndarray:
        """Half-rule sums of w times the second difference, one per interior node"""
        return self.P @ u_box + self.b_ext - 2.0 * self.kernel_mass * u_box[self.interior]

    def apply(self, u_box: np.ndarray) -> np.ndarray:
        p = self.params
        hess = self.euclidean_hessians(u_box)
        horizontal = self.sigma @ hess @ np.swapaxes(self.sigma, -1, -2)
        horizontal = 0.5 * (horizontal + np.swapaxes(horizontal, -1, -2))
        local = p.alpha * np.atleast_1d(pucci_plus(horizontal, p.ellipticity)) if p.alpha else 0.0
        inner = np.einsum('nab,nab->n', self.inner_coeff, hess)
        K = p.beta * p.c_norm
        return local + K * self.nonlocal_sum(u_box) + 0.5 * K * inner

    def linear_matrix(self, coefficient: Optional[np.ndarray]) -> sparse.csr_matrix:
        """Sparse matrix of u -> alpha tr(B D^2 u) + nonlocal part, B = sigma^T A sigma per node"""
        p = self.params
        K = p.beta * p.c_norm
        n = self.n_interior
        total = K * self.P - sparse.csr_matrix(
            (np.full(n, 2.0 * K * self.kernel_mass), (np.arange(n), self.interior)), shape=(n, self.grid.size))
        coeff = 0.5 * K * self.inner_coeff
        if coefficient is not None and p.alpha:
            coeff = coeff + p.alpha * np.swapaxes(self.sigma, -1, -2) @ coefficient @ self.sigma
        for (a, b), S in self.stencils.items():
            weight = coeff[:, a, a] if a == b else coeff[:, a, b] + coeff[:, b, a]
            total = total + sparse.diags(weight) @ S
        return total.tocsr()

    def damping(self) -> float:
        return damping_for(self.grid, self.params, self.rule)


def rule_mass(rule: QuadratureRule) -> float:
    """Sum of the stored half-rule weights"""
    return math.fsum(float(np.sum(rule.nodes(k)[1])) for k in range(len(rule.annuli)))


def inner_coefficients(sigma: np.ndarray, params: OperatorParams, r_inner: float) -> np.ndarray:
    """B_inner = m_h sigma^T sigma + m_t e_t e_t^T, so that the small-ball term is tr(B_inner D^2 u)"""
    m_h, m_t = inner_moments(params.N, params.s, r_inner)
    coeff = m_h * np.swapaxes(sigma, -1, -2) @ sigma
    coeff[:, -1, -1] += m_t
    return coeff


def damping_for(grid: Grid, params: OperatorParams, rule: QuadratureRule) -> float:
    """1 / (alpha Lam w_local + beta mass) with w_local the worst stencil weight of
    tr(sigma^T sigma D^2) and mass the nonlocal diagonal weight"""
    sigma = sigma_coords(grid.nodes[grid.interior])
    if sigma.shape[0] == 0:
        raise DomainError("grid has no interior nodes")
    A = np.swapaxes(sigma, -1, -2) @ sigma
    w_local = float(np.max(gershgorin_weight(A, grid.spacing)))
    w_inner = float(np.max(gershgorin_weight(inner_coefficients(sigma, params, rule.annuli[0].lower), grid.spacing)))
    mass = params.c_norm * (2.0 * rule_mass(rule) + 0.5 * w_inner)
    return 1.0 / (params.alpha * params.Lam * w_local + params.beta * mass)
