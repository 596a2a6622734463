"""
Dirichlet Solver Module

Numerical solutions of L u = f in Omega, u = g outside Omega, on a box grid around a
gauge ball. Two schemes share the assembled `GridOperator`:

- "richardson": damped fixed-point sweeps u <- u + tau (L u - f) with tau from
  `damping_bound`, stopped on the residual sup-norm
- "policy": Howard iteration; freeze the maximizing coefficient matrix at every node,
  solve the resulting sparse linear system, repeat until the residual is small

Both are Jacobi style: each sweep reads the previous iterate and writes a new buffer.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .errors import DomainError, NumericalFailure
from .fields import FieldWithExterior, Grid
from .fracsublap import OperatorParams, QuadratureSpec, prepare_rule
from .hcalculus import SmoothFn
from .hgroup import GaugeBall
from .mixedop import GridOperator, damping_for, residual_field
from .pucci import optimizer_matrix


METHODS = ('richardson', 'policy')

DIVERGENCE_WINDOW = 100
DIVERGENCE_FACTOR = 10.0
PROGRESS_EVERY = 25

# direct sparse solves up to this many unknowns, GMRES beyond
DIRECT_LIMIT = 4000

ProgressCallback = Callable[[int, float], None]


def solver_quadrature(params: OperatorParams, **overrides) -> QuadratureSpec:
    """Coarse angular rule for grid solves; the grid already limits accuracy to O(h^2)"""
    settings = dict(annuli_per_decade=2, points_per_annulus=3, polar_points=6,
                    azimuth_points=8, tail_tolerance=1e-3)
    settings.update(overrides)
    return QuadratureSpec.auto(params, **settings)


@dataclass(frozen=True)
class DirichletProblem:
    """L u = f in omega, u = g on the complement"""
    omega: GaugeBall
    f: SmoothFn
    g: SmoothFn
    params: OperatorParams

    def __post_init__(self):
        bound = getattr(self.g, 'sup_abs', None)
        if bound is None or not math.isfinite(bound):
            raise DomainError(f"exterior data {self.g.name} must be bounded")
        if self.omega.N != self.params.N:
            raise DomainError(f"domain lives in H^{self.omega.N} but params.N = {self.params.N}")


@dataclass
class SolveReport:
    iterations: int
    residual: float
    damping: float
    converged: bool
    method: str = 'richardson'
    tolerance: float = 0.0
    status: str = 'ok'
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'iterations': self.iterations,
            'residual': self.residual,
            'damping': self.damping,
            'converged': self.converged,
            'method': self.method,
            'tolerance': self.tolerance,
            'status': self.status,
        }


def damping_bound(grid: Grid, params: OperatorParams, spec: Optional[QuadratureSpec] = None) -> float:
    """tau = 1 / (alpha Lam (stencil weight) + beta c_norm (nonlocal diagonal mass))"""
    spec = spec or solver_quadrature(params)
    rule = prepare_rule(params, spec, max(grid.h_xy, math.sqrt(grid.h_t)))
    return damping_for(grid, params, rule)


def _initial_guess(op: GridOperator) -> np.ndarray:
    """g on the exterior nodes, inside the mean of g over the rim around Omega"""
    rim = op.boundary_values[op.rim_ids]
    fill = float(np.mean(rim)) if rim.size else 0.0
    return op.full_vector(np.full(op.n_interior, fill))


def _sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


def _richardson(op: GridOperator, rhs: np.ndarray, tol: float, max_iter: int,
                progress: Optional[ProgressCallback]) -> Tuple[np.ndarray, SolveReport]:
    tau = op.damping()
    u = _initial_guess(op)
    history: List[float] = []
    report = SolveReport(0, math.inf, tau, False, 'richardson', tol)
    for k in range(max_iter + 1):
        r = op.apply(u) - rhs
        res = _sup(r)
        history.append(res)
        report.iterations, report.residual = k, res
        if not math.isfinite(res):
            report.status = 'non-finite'
            raise NumericalFailure(f"non-finite residual at iteration {k}", report=report)
        if progress is not None and k % PROGRESS_EVERY == 0:
            progress(k, res)
        if res < tol:
            report.converged = True
            break
        if k >= DIVERGENCE_WINDOW and res > DIVERGENCE_FACTOR * history[k - DIVERGENCE_WINDOW]:
            report.status = 'diverged'
            raise NumericalFailure(
                f"residual grew from {history[k - DIVERGENCE_WINDOW]:.3g} to {res:.3g} "
                f"over {DIVERGENCE_WINDOW} iterations", report=report)
        if k == max_iter:
            break
        nxt = u.copy()
        nxt[op.interior] = u[op.interior] + tau * r
        u = nxt
    report.history = history
    if not report.converged:
        report.status = 'max_iter'
    return u, report


def _linear_solve(matrix: sparse.csr_matrix, b: np.ndarray, x0: np.ndarray, tol: float) -> np.ndarray:
    if matrix.shape[0] <= DIRECT_LIMIT:
        return np.asarray(sparse_linalg.spsolve(matrix.tocsc(), b), dtype=float)
    diag = matrix.diagonal()
    inv = np.where(np.abs(diag) > 0, 1.0 / np.where(diag == 0, 1.0, diag), 1.0)
    precond = sparse_linalg.LinearOperator(matrix.shape, matvec=lambda v: inv * v)
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    x, info = sparse_linalg.gmres(matrix, b, x0=x0, rtol=0.1 * tol / scale, restart=50,
                                  maxiter=200, M=precond)
    if info < 0:
        raise NumericalFailure(f"GMRES breakdown (info={info})")
    return np.asarray(x, dtype=float)


def _policy(op: GridOperator, rhs: np.ndarray, tol: float, max_iter: int,
            progress: Optional[ProgressCallback]) -> Tuple[np.ndarray, SolveReport]:
    p = op.params
    u = _initial_guess(op)
    K = p.beta * p.c_norm
    g_ext = u[op.exterior_ids]
    history: List[float] = []
    report = SolveReport(0, math.inf, op.damping(), False, 'policy', tol)
    for k in range(max_iter + 1):
        res = _sup(op.apply(u) - rhs)
        history.append(res)
        report.iterations, report.residual = k, res
        if not math.isfinite(res):
            report.status = 'non-finite'
            raise NumericalFailure(f"non-finite residual at policy step {k}", report=report)
        if progress is not None:
            progress(k, res)
        if res < tol:
            report.converged = True
            break
        if k == max_iter:
            break
        coefficient = optimizer_matrix(op.horizontal_hessians(u), p.ellipticity) if p.alpha else None
        matrix = op.linear_matrix(coefficient)
        A_ii = matrix[:, op.interior]
        A_ie = matrix[:, op.exterior_ids]
        b = rhs - A_ie @ g_ext - K * op.b_ext
        interior = _linear_solve(A_ii.tocsr(), b, u[op.interior], tol)
        if not np.all(np.isfinite(interior)):
            report.status = 'non-finite'
            raise NumericalFailure(f"linear solve returned non-finite values at policy step {k}", report=report)
        u = op.full_vector(interior)
    report.history = history
    if not report.converged:
        report.status = 'max_iter'
    return u, report


def solve_dirichlet(prob: DirichletProblem, grid: Grid, tol: float = 1e-3, max_iter: int = 20000,
                    spec: Optional[QuadratureSpec] = None, method: str = 'richardson', threads: int = 1,
                    progress: Optional[ProgressCallback] = None) -> Tuple[FieldWithExterior, SolveReport]:
    """Solve the Dirichlet problem on the interior nodes of `grid`

    Raises NumericalFailure (with the report attached) on divergence or non-finite
    iterates; hitting max_iter returns normally with converged False.
    """
    if tol <= 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if grid.ball != prob.omega:
        raise DomainError("grid was built for a different domain")
    spec = spec or solver_quadrature(prob.params)
    op = GridOperator(grid, prob.g, prob.params, spec, threads=threads)
    rhs = np.asarray(prob.f.values(op.coords), dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise DomainError(f"right-hand side {prob.f.name} is not finite on the grid")
    run = _richardson if method == 'richardson' else _policy
    u, report = run(op, rhs, tol, max_iter, progress)
    field = FieldWithExterior(grid, u, prob.g, name='solution',
                              meta={'report': report.to_dict(), 'f': prob.f.name, 'g': prob.g.name})
    return field, report


@dataclass
class ViolationReport:
    """Worst violation of one side of the viscosity inequality over the interior nodes"""
    side: str
    worst: float
    location: List[float]
    nodes: int

    def to_dict(self) -> dict:
        return {'side': self.side, 'worst': self.worst, 'location': self.location, 'nodes': self.nodes}


def check_viscosity_inequality(u: FieldWithExterior, f: SmoothFn, params: OperatorParams,
                               spec: QuadratureSpec, side: str = 'sub', threads: int = 1) -> ViolationReport:
    """sub: max(0, max f - L u); super: max(0, max L u - f), by pointwise re-evaluation"""
    if side not in ('sub', 'super'):
        raise DomainError(f"side must be 'sub' or 'super', got {side!r}")
    res = residual_field(u, f, params, spec, threads=threads)
    if res.residual.size == 0:
        return ViolationReport(side, 0.0, [], 0)
    gap = -res.residual if side == 'sub' else res.residual
    worst = int(np.argmax(gap))
    return ViolationReport(side, max(0.0, float(gap[worst])), res.coords[worst].tolist(), int(gap.size))
