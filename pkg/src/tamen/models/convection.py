"""Periodic 2D transport ``du/dt = (d/dq1 + d/dq2) u`` on ``[-10, 10)^2`` in QTT form.

Central differences on a uniform periodic grid with ``n = 2^L`` points per
axis. Every grid index is split into ``L`` binary digits (least significant
first), so the state is a train of ``2L`` cores of size 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import tt
from ..tt import TTOperator, TTVector

HALF_WIDTH = 10.0


def grid_step(L: int) -> float:
    return 2.0 * HALF_WIDTH / 2 ** L


def grid_points(L: int) -> np.ndarray:
    return -HALF_WIDTH + grid_step(L) * np.arange(2 ** L)


def _check_levels(L):
    if int(L) != L or L < 2:
        raise ValueError(f"at least two QTT levels are required, got {L}")


def cyclic_shift_qtt(L: int) -> TTOperator:
    """``P`` with ``(P u)(i) = u(i + 1 mod 2^L)`` as a rank-2 QTT operator.

    The column index is the row index plus one, added digit by digit with a
    carry bit travelling along the bonds; the carry out of the top digit is
    dropped, which wraps the index around.
    """
    _check_levels(L)
    core = np.zeros((2, 2, 2, 2))
    for c_in in range(2):
        for i in range(2):
            s = i + c_in
            core[c_in, i, s % 2, s // 2] = 1.0
    cores = [core.copy() for _ in range(L)]
    cores[0] = core[1:2]
    cores[-1] = core.sum(axis=3, keepdims=True)
    return TTOperator(cores)


def periodic_gradient_qtt(L: int, eps: float | None = 1e-13) -> TTOperator:
    """Central difference ``(P - P^T) / (2h)`` on the periodic grid.

    With ``eps=None`` the unrounded rank-4 train is returned; its entries
    are exactly ``0`` and ``+-1/(2h)``, so it is skew-symmetric bit for bit.
    """
    P = cyclic_shift_qtt(L)
    G = tt.op_scale(tt.op_add(P, tt.op_scale(P.T, -1.0)), 1.0 / (2.0 * grid_step(L)))
    return G if eps is None else tt.op_round(G, eps)


def gradient_sparse(L: int) -> sp.csr_matrix:
    n = 2 ** L
    P = sp.eye(n, k=1, format="csr") + sp.eye(n, k=-(n - 1), format="csr")
    return ((P - P.T) / (2.0 * grid_step(L))).tocsr()


def convection_operator_qtt(L: int, eps: float = 1e-13) -> TTOperator:
    G = periodic_gradient_qtt(L)
    Id = tt.identity([2] * L)
    return tt.op_round(tt.op_add(tt.op_join(G, Id), tt.op_join(Id, G)), eps)


def convection_operator_sparse(L: int) -> sp.csr_matrix:
    """Sparse ``G (x) I + I (x) G`` with the first axis fastest."""
    G = gradient_sparse(L)
    Id = sp.identity(2 ** L, format="csr")
    return (sp.kron(Id, G) + sp.kron(G, Id)).tocsr()


def gaussian_1d(L: int) -> np.ndarray:
    return np.exp(-grid_points(L) ** 2)


def gaussian_qtt(L: int, eps: float = 1e-14) -> TTVector:
    """``exp(-q1^2 - q2^2)`` as the rank-one join of two 1D QTT trains."""
    _check_levels(L)
    g = tt.qtt_fold(gaussian_1d(L), eps)
    return tt.join(g, g)


def exact_solution(L: int, t: float) -> np.ndarray:
    """Dense ``u0(q1 + t, q2 + t)`` with periodic wrap (first axis fastest)."""
    q = grid_points(L)
    shifted = np.mod(q + t + HALF_WIDTH, 2 * HALF_WIDTH) - HALF_WIDTH
    g = np.exp(-shifted ** 2)
    return np.kron(g, g)


@dataclass
class ConvectionModel:
    L: int
    operator: TTOperator = field(init=False, repr=False)
    initial: TTVector = field(init=False, repr=False)
    mass_vector: TTVector = field(init=False, repr=False)

    def __post_init__(self):
        _check_levels(self.L)
        self.operator = convection_operator_qtt(self.L)
        self.initial = gaussian_qtt(self.L)
        self.mass_vector = tt.ones([2] * (2 * self.L))

    @property
    def n(self):
        return 2 ** self.L

    @property
    def h(self):
        return grid_step(self.L)

    @property
    def period(self):
        return 2.0 * HALF_WIDTH

    def sparse_operator(self):
        return convection_operator_sparse(self.L)

    def dense_initial(self):
        g = gaussian_1d(self.L)
        return np.kron(g, g)

    def to_grid(self, u: TTVector) -> np.ndarray:
        """Dense ``n x n`` array ``U[i1, i2]`` of a QTT state."""
        return tt.to_dense(u).reshape(self.n, self.n, order="F")
