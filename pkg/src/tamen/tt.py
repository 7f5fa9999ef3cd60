"""Tensor-train vectors and operators.

Cores of a :class:`TTVector` have shape ``(r_{k-1}, n_k, r_k)``; cores of a
:class:`TTOperator` have shape ``(R_{k-1}, m_k, n_k, R_k)`` with row mode
``m_k`` and column mode ``n_k``. Multi-indices are linearized with the first
index running fastest, so a rank-one train ``x1, x2`` densifies to
``np.kron(x2, x1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

DENSE_LIMIT = 2 ** 26


class TTShapeError(ValueError):
    pass


@dataclass(frozen=True)
class ModeShape:
    dims: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) < 1 or any(n < 1 for n in dims):
            raise TTShapeError(f"invalid mode sizes {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def d(self):
        return len(self.dims)

    @property
    def total(self):
        return int(np.prod(self.dims, dtype=np.int64))


def _result_dtype(*arrays):
    return np.result_type(np.float64, *arrays)


@dataclass
class TTVector:
    """Vector of length ``n_1 * ... * n_d`` stored as a chain of 3-way cores.

    ``ortho`` records a known gauge: ``("left", k)`` means cores ``0..k-1``
    are left-orthogonal, ``("right", k)`` means cores ``k+1..d-1`` are
    right-orthogonal. It is advisory and dropped by any operation that does
    not preserve it.
    """

    cores: list
    ortho: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        cores = [np.asarray(c) for c in self.cores]
        if not cores:
            raise TTShapeError("a tensor train needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise TTShapeError(f"core {k} has {c.ndim} dims, expected 3")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise TTShapeError("border ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise TTShapeError(f"rank mismatch between cores {k} and {k + 1}")
        self.cores = cores

    @property
    def d(self):
        return len(self.cores)

    @property
    def n(self):
        return tuple(c.shape[1] for c in self.cores)

    @property
    def shape(self):
        return ModeShape(self.n)

    @property
    def ranks(self):
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def max_rank(self):
        return max(self.ranks)

    @property
    def dtype(self):
        return _result_dtype(*self.cores)

    @property
    def size(self):
        """Number of stored scalars."""
        return sum(c.size for c in self.cores)

    def copy(self):
        return TTVector([c.copy() for c in self.cores], self.ortho)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, c):
        return scale(self, c)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def full(self):
        return to_dense(self)


@dataclass
class TTOperator:
    """Matrix whose rows and columns are both multi-indices, in TT form."""

    cores: list

    def __post_init__(self):
        cores = [np.asarray(c) for c in self.cores]
        if not cores:
            raise TTShapeError("an operator train needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 4:
                raise TTShapeError(f"operator core {k} has {c.ndim} dims, expected 4")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise TTShapeError("border ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[3] != cores[k + 1].shape[0]:
                raise TTShapeError(f"rank mismatch between cores {k} and {k + 1}")
        self.cores = cores

    @property
    def d(self):
        return len(self.cores)

    @property
    def row_shape(self):
        return ModeShape(tuple(c.shape[1] for c in self.cores))

    @property
    def col_shape(self):
        return ModeShape(tuple(c.shape[2] for c in self.cores))

    @property
    def ranks(self):
        return (1,) + tuple(c.shape[3] for c in self.cores)

    @property
    def max_rank(self):
        return max(self.ranks)

    @property
    def dtype(self):
        return _result_dtype(*self.cores)

    @property
    def T(self):
        return TTOperator([c.transpose(0, 2, 1, 3) for c in self.cores])

    @property
    def H(self):
        return TTOperator([c.transpose(0, 2, 1, 3).conj() for c in self.cores])

    def __matmul__(self, x):
        if isinstance(x, TTVector):
            return apply(self, x)
        return NotImplemented

    def __add__(self, other):
        return op_add(self, other)

    def __mul__(self, c):
        return op_scale(self, c)

    __rmul__ = __mul__

    def full(self):
        return op_to_dense(self)


# ---------------------------------------------------------------------------
# construction and densification


def rank_one(factors: Sequence) -> TTVector:
    if len(factors) == 0:
        raise TTShapeError("rank_one needs at least one factor")
    cores = []
    for f in factors:
        f = np.asarray(f)
        if f.ndim != 1 or f.size == 0:
            raise TTShapeError("factors must be nonempty vectors")
        cores.append(f.reshape(1, -1, 1))
    return TTVector(cores)


def ones(dims, dtype=float) -> TTVector:
    return rank_one([np.ones(n, dtype=dtype) for n in dims])


def zeros(dims, dtype=float) -> TTVector:
    return rank_one([np.zeros(n, dtype=dtype) for n in dims])


def random_tt(dims, ranks, rng=None, dtype=float) -> TTVector:
    """Random train with Gaussian cores; ``ranks`` is an int or the inner ranks."""
    rng = np.random.default_rng(rng)
    d = len(dims)
    if np.isscalar(ranks):
        ranks = [ranks] * (d - 1)
    r = [1] + list(ranks) + [1]
    cores = []
    for k in range(d):
        shape = (r[k], dims[k], r[k + 1])
        c = rng.standard_normal(shape)
        if np.issubdtype(np.dtype(dtype), np.complexfloating):
            c = c + 1j * rng.standard_normal(shape)
        cores.append(c)
    return TTVector(cores)


def identity(dims, dtype=float) -> TTOperator:
    return TTOperator([np.eye(n, dtype=dtype).reshape(1, n, n, 1) for n in dims])


def kron_operator(matrices: Sequence) -> TTOperator:
    """Rank-one operator ``M_1 (x) ... (x) M_d`` in the first-index-fastest ordering."""
    return TTOperator([np.asarray(m).reshape(1, *np.shape(m), 1) for m in matrices])


def _check_dense_size(total, limit):
    if total > limit:
        raise MemoryError(f"refusing to densify {total} entries (limit {limit})")


def to_dense(x: TTVector, limit: int = DENSE_LIMIT) -> np.ndarray:
    _check_dense_size(x.shape.total, limit)
    res = x.cores[0].reshape(x.cores[0].shape[1], -1)
    for c in x.cores[1:]:
        r0, n, r1 = c.shape
        res = (res @ c.reshape(r0, n * r1)).reshape(-1, r1)
    # res rows are C-ordered over (i_1, ..., i_d); reorder to first-fastest
    return res.reshape(x.n).ravel(order="F")


def op_to_dense(A: TTOperator, limit: int = DENSE_LIMIT) -> np.ndarray:
    m, n = A.row_shape.total, A.col_shape.total
    _check_dense_size(m * n, limit)
    res = np.ones((1, 1, 1), dtype=A.dtype)
    for c in A.cores:
        R0, mk, nk, R1 = c.shape
        res = np.einsum("abr,rijs->aibjs", res, c)
        res = res.reshape(res.shape[0] * mk, res.shape[2] * nk, R1)
    # rows/cols are C-ordered with the *last* index fastest; flip to first-fastest
    rows = A.row_shape.dims
    cols = A.col_shape.dims
    res = res.reshape(rows + cols)
    d = A.d
    perm = list(range(d - 1, -1, -1)) + list(range(2 * d - 1, d - 1, -1))
    return res.transpose(perm).reshape(m, n)


def _truncation_rank(s, tol):
    """Smallest rank whose discarded tail has Frobenius norm <= tol (never below 1)."""
    if s.size == 0:
        return 1
    tail = np.sqrt(np.cumsum((s ** 2)[::-1]))[::-1]
    keep = np.nonzero(tail > tol)[0]
    r = keep[-1] + 1 if keep.size else 1
    return max(int(r), 1)


def _svd(a):
    try:
        return sla.svd(a, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return sla.svd(a, full_matrices=False, lapack_driver="gesvd")


def from_dense(a, shape, eps: float = 1e-14) -> TTVector:
    """TT-SVD of a dense vector; ``‖result - a‖ <= eps ‖a‖``."""
    shape = shape if isinstance(shape, ModeShape) else ModeShape(tuple(shape))
    a = np.asarray(a)
    if a.size != shape.total:
        raise TTShapeError(f"array of size {a.size} does not match modes {shape.dims}")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    d = shape.d
    nrm = np.linalg.norm(a)
    tol = eps * nrm / np.sqrt(max(d - 1, 1))
    c = a.reshape(shape.dims, order="F")
    cores = []
    r = 1
    for k in range(d - 1):
        c = c.reshape(r * shape.dims[k], -1, order="F")
        u, s, vt = _svd(c)
        rk = _truncation_rank(s, tol)
        cores.append(u[:, :rk].reshape(r, shape.dims[k], rk, order="F"))
        c = s[:rk, None] * vt[:rk]
        r = rk
    cores.append(c.reshape(r, shape.dims[-1], 1, order="F"))
    return TTVector(cores, ortho=("left", d - 1))


def op_from_dense(M, rows, cols=None, eps: float = 1e-14) -> TTOperator:
    """TT-SVD of a dense matrix with the first-index-fastest row and column ordering."""
    rows = tuple(rows)
    cols = rows if cols is None else tuple(cols)
    M = np.asarray(M)
    if len(rows) != len(cols):
        raise TTShapeError("row and column modes must have the same length")
    m, n = int(np.prod(rows)), int(np.prod(cols))
    if M.shape != (m, n):
        raise TTShapeError(f"matrix of shape {M.shape} does not match modes {rows} x {cols}")
    d = len(rows)
    t = M.reshape(rows[::-1] + cols[::-1])
    t = t.transpose(list(range(d - 1, -1, -1)) + list(range(2 * d - 1, d - 1, -1)))
    t = t.transpose([a for k in range(d) for a in (k, d + k)])
    v = from_dense(t.ravel(order="F"), [rows[k] * cols[k] for k in range(d)], eps)
    return TTOperator([c.reshape(c.shape[0], rows[k], cols[k], c.shape[2], order="F")
                       for k, c in enumerate(v.cores)])


# ---------------------------------------------------------------------------
# algebra


def _check_same_modes(x, y):
    if x.n != y.n:
        raise TTShapeError(f"mode mismatch: {x.n} vs {y.n}")


def add(x: TTVector, y: TTVector) -> TTVector:
    _check_same_modes(x, y)
    d = x.d
    dtype = _result_dtype(x.dtype, y.dtype)
    if d == 1:
        return TTVector([x.cores[0] + y.cores[0]])
    cores = []
    for k, (a, b) in enumerate(zip(x.cores, y.cores)):
        ra0, n, ra1 = a.shape
        rb0, _, rb1 = b.shape
        if k == 0:
            c = np.concatenate([a, b], axis=2).astype(dtype, copy=False)
        elif k == d - 1:
            c = np.concatenate([a, b], axis=0).astype(dtype, copy=False)
        else:
            c = np.zeros((ra0 + rb0, n, ra1 + rb1), dtype=dtype)
            c[:ra0, :, :ra1] = a
            c[ra0:, :, ra1:] = b
        cores.append(c)
    return TTVector(cores)


def scale(x: TTVector, c) -> TTVector:
    cores = [core.copy() for core in x.cores]
    cores[0] = cores[0] * c
    return TTVector(cores)


def dot(x: TTVector, y: TTVector):
    """Inner product ``x^* y`` (conjugates ``x``)."""
    _check_same_modes(x, y)
    env = np.ones((1, 1))
    for a, b in zip(x.cores, y.cores):
        env = _vec_left_step(env, a, b)
    return env[0, 0]


def _vec_left_step(env, a, b):
    # env[p, q] with p over conj(a) rank, q over b rank
    t = np.tensordot(env, b, axes=(1, 0))  # p, n, q'
    return np.tensordot(a.conj(), t, axes=([0, 1], [0, 1]))


def norm(x: TTVector) -> float:
    """Euclidean norm via left orthogonalization (no squaring of tiny values)."""
    y = orthogonalize(x, x.d - 1)
    return float(np.linalg.norm(y.cores[-1]))


def apply(A: TTOperator, x: TTVector) -> TTVector:
    if A.col_shape.dims != x.n:
        raise TTShapeError(f"operator columns {A.col_shape.dims} do not match vector modes {x.n}")
    cores = []
    for a, c in zip(A.cores, x.cores):
        R0, m, n, R1 = a.shape
        r0, _, r1 = c.shape
        y = np.einsum("AijB,ajb->AaiBb", a, c)
        cores.append(y.reshape(R0 * r0, m, R1 * r1))
    return TTVector(cores)


def op_add(A: TTOperator, B: TTOperator) -> TTOperator:
    if A.row_shape != B.row_shape or A.col_shape != B.col_shape:
        raise TTShapeError("operator shapes differ")
    d = A.d
    dtype = _result_dtype(A.dtype, B.dtype)
    if d == 1:
        return TTOperator([A.cores[0] + B.cores[0]])
    cores = []
    for k, (a, b) in enumerate(zip(A.cores, B.cores)):
        ra0, m, n, ra1 = a.shape
        rb0, _, _, rb1 = b.shape
        if k == 0:
            c = np.concatenate([a, b], axis=3).astype(dtype, copy=False)
        elif k == d - 1:
            c = np.concatenate([a, b], axis=0).astype(dtype, copy=False)
        else:
            c = np.zeros((ra0 + rb0, m, n, ra1 + rb1), dtype=dtype)
            c[:ra0, :, :, :ra1] = a
            c[ra0:, :, :, ra1:] = b
        cores.append(c)
    return TTOperator(cores)


def op_scale(A: TTOperator, c) -> TTOperator:
    cores = [core.copy() for core in A.cores]
    cores[0] = cores[0] * c
    return TTOperator(cores)


def op_sum(terms: Sequence[TTOperator]) -> TTOperator:
    out = terms[0]
    for t in terms[1:]:
        out = op_add(out, t)
    return out


def op_matmul(A: TTOperator, B: TTOperator) -> TTOperator:
    """Operator product ``A B``; ranks multiply."""
    if A.col_shape != B.row_shape:
        raise TTShapeError("inner operator modes differ")
    cores = []
    for a, b in zip(A.cores, B.cores):
        y = np.einsum("AijB,CjkD->ACikBD", a, b)
        s = y.shape
        cores.append(y.reshape(s[0] * s[1], s[2], s[3], s[4] * s[5]))
    return TTOperator(cores)


def op_round(A: TTOperator, eps: float = 1e-13) -> TTOperator:
    """Round an operator by treating each core as a vector core of mode ``m*n``."""
    flat = TTVector([c.reshape(c.shape[0], c.shape[1] * c.shape[2], c.shape[3]) for c in A.cores])
    flat = round(flat, eps)
    cores = [
        f.reshape(f.shape[0], a.shape[1], a.shape[2], f.shape[2])
        for f, a in zip(flat.cores, A.cores)
    ]
    return TTOperator(cores)


# ---------------------------------------------------------------------------
# gauge: orthogonalization and rounding


def _qr(a):
    q, r = np.linalg.qr(a)
    return q, r


def orth_left_core(core):
    """QR of the ``(r0 n) x r1`` unfolding; returns the orthonormal core and R."""
    r0, n, r1 = core.shape
    q, r = _qr(core.reshape(r0 * n, r1))
    return q.reshape(r0, n, q.shape[1]), r


def orth_right_core(core):
    """LQ of the ``r0 x (n r1)`` unfolding; returns L and the row-orthonormal core."""
    r0, n, r1 = core.shape
    q, r = _qr(core.reshape(r0, n * r1).T)
    return r.T, q.T.reshape(q.shape[1], n, r1)


def orthogonalize(x: TTVector, k: int, direction: str = "both") -> TTVector:
    """Gauge ``x`` so cores before ``k`` are left- and cores after ``k`` right-orthogonal.

    ``k`` is zero-based. ``direction="left"`` only sweeps cores ``0..k-1``,
    ``"right"`` only cores ``d-1..k+1``.
    """
    d = x.d
    if not 0 <= k < d:
        raise IndexError(f"pivot {k} out of range for {d} cores")
    cores = [c.copy() for c in x.cores]
    if direction in ("both", "left"):
        for j in range(k):
            cores[j], r = orth_left_core(cores[j])
            cores[j + 1] = np.tensordot(r, cores[j + 1], axes=(1, 0))
    if direction in ("both", "right"):
        for j in range(d - 1, k, -1):
            l, cores[j] = orth_right_core(cores[j])
            cores[j - 1] = np.tensordot(cores[j - 1], l, axes=(2, 0))
    if direction == "both":
        ortho = ("pivot", k)
    elif direction == "left":
        ortho = ("left", k)
    else:
        ortho = ("right", k)
    return TTVector(cores, ortho)


def round(x: TTVector, eps: float = 1e-14, rmax: int | None = None) -> TTVector:
    """Recompress ``x`` so that ``‖result - x‖ <= eps ‖x‖``.

    Right-to-left orthogonalization followed by a left-to-right SVD sweep
    with per-core threshold ``eps ‖x‖ / sqrt(d-1)``. The result is
    left-orthogonal up to its last core.
    """
    d = x.d
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    y = orthogonalize(x, 0, direction="right")
    cores = y.cores
    nrm = np.linalg.norm(cores[0])
    tol = eps * nrm / np.sqrt(max(d - 1, 1))
    for k in range(d - 1):
        r0, n, r1 = cores[k].shape
        u, s, vt = _svd(cores[k].reshape(r0 * n, r1))
        rk = _truncation_rank(s, tol)
        if rmax is not None:
            rk = min(rk, rmax)
        cores[k] = u[:, :rk].reshape(r0, n, rk)
        sv = s[:rk, None] * vt[:rk]
        cores[k + 1] = np.tensordot(sv, cores[k + 1], axes=(1, 0))
    return TTVector(cores, ortho=("left", d - 1))


def left_gram(x: TTVector, k: int) -> np.ndarray:
    """Gram matrix of the left interface built from cores ``0..k-1``."""
    env = np.ones((1, 1))
    for c in x.cores[:k]:
        env = _vec_left_step(env, c, c)
    return env


def right_gram(x: TTVector, k: int) -> np.ndarray:
    """Gram matrix (conjugated) of the right interface built from cores ``k+1..d-1``."""
    env = np.ones((1, 1))
    for c in x.cores[:k:-1]:
        env = _vec_right_step(env, c, c)
    return env


def _vec_right_step(env, a, b):
    # env[p, q] with p over conj(a) rank, q over b rank
    t = np.tensordot(b, env, axes=(2, 1))  # q0, n, p
    return np.tensordot(a.conj(), t, axes=([1, 2], [1, 2]))


def interface_left(x: TTVector, k: int, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense left interface of cores ``0..k-1``, shape ``(n_1...n_k, r_k)``."""
    if k == 0:
        return np.ones((1, 1))
    res = x.cores[0].reshape(x.cores[0].shape[1], -1)
    for c in x.cores[1:k]:
        r0, n, r1 = c.shape
        res = (res @ c.reshape(r0, n * r1)).reshape(-1, r1)
    dims = x.n[:k]
    _check_dense_size(res.size, limit)
    r = res.shape[1]
    return res.reshape(dims + (r,)).transpose(list(range(k - 1, -1, -1)) + [k]).reshape(-1, r)


def interface_right(x: TTVector, k: int, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense right interface of cores ``k+1..d-1``, shape ``(r_{k+1}, n_{k+2}...n_d)``."""
    d = x.d
    if k == d - 1:
        return np.ones((1, 1))
    tail = TTVector([np.eye(x.cores[k + 1].shape[0]).reshape(1, -1, x.cores[k + 1].shape[0])]
                    + [c for c in x.cores[k + 1:]])
    dense = to_dense(tail, limit)
    r = x.cores[k + 1].shape[0]
    return dense.reshape(r, -1, order="F")


def frame_matrix(x: TTVector, k: int, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Dense frame ``X_{!=k}`` mapping the vectorized core ``k`` (C order) to the full vector."""
    left = interface_left(x, k, limit)
    right = interface_right(x, k, limit)
    n = x.n[k]
    # full index = i_left + N_left*(i_k + n*i_right); core index (a, i, b) C-ordered
    Nl, ra = left.shape
    rb, Nr = right.shape
    F = np.einsum("La,ij,bR->RiLajb", left, np.eye(n), right)
    return F.reshape(Nr * n * Nl, ra * n * rb)


# ---------------------------------------------------------------------------
# environments: partial contractions used by frame projections


def env_left_op(env, xc, ac, yc):
    """Extend a left environment ``E[a, A, b]`` of ``(conj x, A, y)`` by one core."""
    t = np.tensordot(env, yc, axes=(2, 0))             # a A j b'
    t = np.tensordot(t, ac, axes=([1, 2], [0, 2]))     # a b' i B
    t = np.tensordot(xc.conj(), t, axes=([0, 1], [0, 2]))  # a' b' B
    return t.transpose(0, 2, 1)


def env_right_op(env, xc, ac, yc):
    """Extend a right environment ``E[a, A, b]`` of ``(conj x, A, y)`` by one core."""
    t = np.tensordot(yc, env, axes=(2, 2))             # b0 j a A
    t = np.tensordot(ac, t, axes=([2, 3], [1, 3]))     # A0 i b0 a
    t = np.tensordot(xc.conj(), t, axes=([1, 2], [1, 3]))  # a0 A0 b0
    return t


def env_left_vec(env, xc, gc):
    """Extend a left environment ``E[a, s]`` of ``(conj x, g)`` by one core."""
    return _vec_left_step(env, xc, gc)


def env_right_vec(env, xc, gc):
    return _vec_right_step(env, xc, gc)


class LocalOperator:
    """Reduced operator ``X_{!=k}^* A X_{!=k}`` in factored form ``L x core x R``.

    ``left`` has shape ``(p0, R0, r0)`` and ``right`` ``(p1, R1, r1)``, ordered
    (projected row, operator rank, column); the row frame may differ from the
    column frame. Local vectors are core arrays of shape ``(r0, n, r1)``
    flattened in C order.
    """

    def __init__(self, left, core, right):
        self.left = left
        self.core = core
        self.right = right
        self.in_shape = (left.shape[2], core.shape[2], right.shape[2])
        self.out_shape = (left.shape[0], core.shape[1], right.shape[0])
        self.shape = (int(np.prod(self.out_shape)), int(np.prod(self.in_shape)))
        self.dtype = _result_dtype(left, core, right)

    def matvec(self, u):
        u = u.reshape(self.in_shape)
        t = np.tensordot(u, self.right, axes=(2, 2))            # a' j b B'
        t = np.tensordot(self.core, t, axes=([2, 3], [1, 3]))   # A i a' b
        t = np.tensordot(self.left, t, axes=([1, 2], [0, 2]))   # a i b
        return t.reshape(-1)

    __call__ = matvec

    def dense(self):
        M = np.einsum("aAc,AijB,bBd->aibcjd", self.left, self.core, self.right)
        return M.reshape(self.shape)


def frame_project_rhs(b: TTVector, x: TTVector, k: int, check: bool = True) -> np.ndarray:
    """``X_{!=k}^* b`` as a core array of shape ``(r_{k-1}, n_k, r_k)``."""
    _check_same_modes(b, x)
    if check:
        _assert_frame_orthogonal(x, k)
    L = np.ones((1, 1))
    for j in range(k):
        L = env_left_vec(L, x.cores[j], b.cores[j])
    R = np.ones((1, 1))
    for j in range(x.d - 1, k, -1):
        R = env_right_vec(R, x.cores[j], b.cores[j])
    return local_rhs(L, b.cores[k], R)


def local_rhs(L, gc, R):
    t = np.tensordot(L, gc, axes=(1, 0))          # a i s'
    return np.tensordot(t, R, axes=(2, 1))        # a i b


def frame_project_op(A: TTOperator, x: TTVector, k: int, check: bool = True) -> LocalOperator:
    if A.col_shape.dims != x.n or A.row_shape.dims != x.n:
        raise TTShapeError("operator and vector modes differ")
    if check:
        _assert_frame_orthogonal(x, k)
    L = np.ones((1, 1, 1))
    for j in range(k):
        L = env_left_op(L, x.cores[j], A.cores[j], x.cores[j])
    R = np.ones((1, 1, 1))
    for j in range(x.d - 1, k, -1):
        R = env_right_op(R, x.cores[j], A.cores[j], x.cores[j])
    return LocalOperator(L, A.cores[k], R)


def _assert_frame_orthogonal(x: TTVector, k: int, tol: float = 1e-10):
    gl = left_gram(x, k)
    gr = right_gram(x, k)
    if not (np.allclose(gl, np.eye(gl.shape[0]), atol=tol)
            and np.allclose(gr, np.eye(gr.shape[0]), atol=tol)):
        raise AssertionError(f"frame of x is not orthogonal around core {k}")


# ---------------------------------------------------------------------------
# quantized (binary) folding


def _check_pow2(n):
    L = int(n).bit_length() - 1
    if n < 1 or (1 << L) != n:
        raise TTShapeError(f"mode size {n} is not a power of two")
    return L


def qtt_fold(x, eps: float = 1e-14) -> TTVector:
    """Split every mode of size ``2^L`` into ``L`` binary modes, least significant first."""
    if not isinstance(x, TTVector):
        x = np.asarray(x).ravel()
        L = _check_pow2(x.size)
        if L == 0:
            return TTVector([x.reshape(1, 1, 1)])
        return from_dense(x, [2] * L, eps)
    cores = []
    for c in x.cores:
        r0, n, r1 = c.shape
        L = _check_pow2(n)
        if L <= 1:
            cores.append(c)
            continue
        # (r0, n, r1) with n = i_1 + 2 i_2 + ... : F-order split of n into digits
        t = c.reshape((r0,) + (2,) * L + (r1,), order="F")
        sub = from_dense(t.ravel(order="F"), (r0,) + (2,) * L + (r1,), eps)
        # absorb the leading and trailing rank modes into their neighbours
        first = np.tensordot(sub.cores[0][0], sub.cores[1], axes=(1, 0))  # r0, 2, s
        last = np.tensordot(sub.cores[-2], sub.cores[-1][:, :, 0], axes=(2, 0))  # s, 2, r1
        mids = sub.cores[2:-2]
        cores.extend([first] + mids + [last])
    return TTVector(cores)


def qtt_unfold(x: TTVector, levels: Sequence[int]) -> TTVector:
    """Merge consecutive binary modes back into modes of size ``2^L`` (inverse of fold)."""
    if sum(levels) != x.d:
        raise TTShapeError("levels do not add up to the number of cores")
    cores = []
    pos = 0
    for L in levels:
        c = x.cores[pos]
        for j in range(1, L):
            nxt = x.cores[pos + j]
            r0, n, _ = c.shape
            # merged index = old + n * digit
            t = np.tensordot(c, nxt, axes=(2, 0)).transpose(0, 2, 1, 3)
            c = t.reshape(r0, n * nxt.shape[1], nxt.shape[2])
        cores.append(c)
        pos += L
    return TTVector(cores)


def join(*trains: TTVector) -> TTVector:
    """Direct product of trains: concatenates their cores (rank-one coupling)."""
    cores = []
    for t in trains:
        cores.extend(t.cores)
    return TTVector(cores)


def op_join(*ops: TTOperator) -> TTOperator:
    cores = []
    for t in ops:
        cores.extend(t.cores)
    return TTOperator(cores)


def qtt_tensor(a) -> np.ndarray:
    """Reshape a dense vector of length ``2^L`` into an ``L``-way binary array.

    Axis ``l`` holds digit ``l`` (least significant first), so
    ``qtt_tensor([a, b, c, d])[i1, i2] == [a, b, c, d][i1 + 2 * i2]``.
    """
    a = np.asarray(a).ravel()
    L = _check_pow2(a.size)
    return a.reshape((2,) * L, order="F")


def qtt_flatten(t) -> np.ndarray:
    """Inverse of :func:`qtt_tensor`."""
    return np.asarray(t).ravel(order="F")
