"""Global space-time system of the Chebyshev-collocated ODE.

For ``dx/dt = A(t) x + f(t)`` on one interval the collocated unknown
``x = [x(t_1); ...; x(t_I)]`` (time slowest) solves ``B x = g`` with

    B = I_N (x) S - sum_p A_p (x) diag(theta_p),     g = x0 (x) (S e) + f,

where ``(x)`` is the Kronecker product in first-index-fastest order, so the
temporal mode is the last core of every train.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tt
from .chebyshev import ChebyshevGrid
from .tt import TTOperator, TTShapeError, TTVector


@dataclass
class TimeAffineOperator:
    """``A(t) = sum_p theta_p(t) A_p`` with scalar time profiles.

    Each profile is ``None`` (constant one), a callable of absolute time, or
    an explicit array of samples at the Chebyshev nodes of one grid.
    """

    operators: list
    profiles: list = field(default=None)

    def __post_init__(self):
        if isinstance(self.operators, TTOperator):
            self.operators = [self.operators]
        if not self.operators:
            raise ValueError("at least one operator term is required")
        if self.profiles is None:
            self.profiles = [None] * len(self.operators)
        if len(self.profiles) != len(self.operators):
            raise ValueError("one time profile per operator term is required")
        rows = self.operators[0].row_shape
        cols = self.operators[0].col_shape
        if rows != cols:
            raise TTShapeError("ODE operators must be square")
        for A in self.operators[1:]:
            if A.row_shape != rows or A.col_shape != cols:
                raise TTShapeError("all operator terms must share their mode sizes")

    @classmethod
    def stationary(cls, A: TTOperator):
        return cls([A], [None])

    @property
    def dims(self):
        return self.operators[0].col_shape.dims

    @property
    def is_stationary(self):
        return len(self.operators) == 1 and self.profiles[0] is None

    def samples(self, grid: ChebyshevGrid, t0: float = 0.0):
        out = []
        for prof in self.profiles:
            if prof is None:
                out.append(np.ones(grid.I))
            elif callable(prof):
                out.append(np.asarray([prof(t0 + t) for t in grid.nodes], dtype=float))
            else:
                s = np.asarray(prof)
                if s.shape != (grid.I,):
                    raise TTShapeError(
                        f"profile has {s.shape} samples, grid has {grid.I} nodes")
                out.append(s)
        return out


def assemble_operator(A: TimeAffineOperator, grid: ChebyshevGrid, t0: float = 0.0) -> TTOperator:
    dims = A.dims
    thetas = A.samples(grid, t0)
    ident = tt.identity(dims)
    terms = [TTOperator(ident.cores + [grid.S.reshape(1, grid.I, grid.I, 1)])]
    for Ap, th in zip(A.operators, thetas):
        terms.append(TTOperator(list(Ap.cores) + [(-np.diag(th)).reshape(1, grid.I, grid.I, 1)]))
    return tt.op_sum(terms)


def initial_term(x0: TTVector, grid: ChebyshevGrid) -> TTVector:
    """The train of ``x0 (x) (S e)``."""
    return TTVector(list(x0.cores) + [grid.Se.reshape(1, grid.I, 1)])


def assemble_rhs(x0: TTVector, grid: ChebyshevGrid, f: TTVector | None = None) -> TTVector:
    g = initial_term(x0, grid)
    if f is None:
        return g
    if f.n != g.n:
        raise TTShapeError(f"source term modes {f.n} do not match {g.n}")
    return tt.add(g, f)


def constant_source(f: TTVector, grid: ChebyshevGrid) -> TTVector:
    """Extend a spatial source train to a time-constant space-time train."""
    return TTVector(list(f.cores) + [np.ones((1, grid.I, 1))])


@dataclass
class SpaceTimeProblem:
    B: TTOperator
    rhs_terms: list
    grid: ChebyshevGrid
    x0: TTVector

    @property
    def g(self) -> TTVector:
        out = self.rhs_terms[0]
        for t in self.rhs_terms[1:]:
            out = tt.add(out, t)
        return out

    @property
    def d(self):
        return self.x0.d


def build_problem(A: TimeAffineOperator, x0: TTVector, grid: ChebyshevGrid,
                  f: TTVector | None = None, t0: float = 0.0) -> SpaceTimeProblem:
    if tuple(x0.n) != tuple(A.dims):
        raise TTShapeError(f"initial state modes {x0.n} do not match operator {A.dims}")
    terms = [initial_term(x0, grid)]
    if f is not None:
        if f.n != terms[0].n:
            raise TTShapeError(f"source term modes {f.n} do not match {terms[0].n}")
        terms.append(f)
    return SpaceTimeProblem(assemble_operator(A, grid, t0), terms, grid, x0)


def global_residual_norm(problem: SpaceTimeProblem, x: TTVector) -> float:
    """``‖g - B x‖ / ‖g‖`` evaluated exactly in TT arithmetic."""
    g = problem.g
    gn = tt.norm(g)
    r = tt.add(g, tt.scale(tt.apply(problem.B, x), -1.0))
    rn = tt.norm(r)
    return rn / gn if gn > 0 else rn


def dense_system(problem: SpaceTimeProblem):
    """Dense ``(B, g)`` for small problems (oracle use)."""
    return tt.op_to_dense(problem.B), tt.to_dense(problem.g)
