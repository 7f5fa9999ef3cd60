"""Alternating sweep machinery for the space-time system ``B x = g``.

The solution train ``x`` and a low-rank residual train ``z`` share the
mode sizes of ``B``. Partial contractions ("environments") of ``B`` and the
right-hand side against the interfaces of ``x`` and ``z`` are cached per
bond so that every local quantity costs only a few small tensor products.

Bond ``k`` sits to the left of core ``k``: left environments at bond ``k``
contract cores ``0..k-1``, right environments at bond ``k`` contract cores
``k..D-1``. Operator environments are ordered (row frame, operator rank,
column frame).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import tt
from .tt import LocalOperator, TTOperator, TTVector

log = logging.getLogger(__name__)


@dataclass
class LocalSolveConfig:
    eps: float = 1e-5
    eta: float = 10.0
    direct_threshold: int = 1000
    max_inner_iters: int = 200

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.eta > 1:
            raise ValueError("eta must exceed 1")
        if self.direct_threshold < 1:
            raise ValueError("direct_threshold must be at least 1")

    @property
    def tol(self):
        return self.eps / self.eta


@dataclass
class LocalSolveInfo:
    method: str
    iterations: int
    residual: float
    converged: bool
    breakdown: bool = False


def bicgstab(matvec, b, x0=None, tol=1e-8, maxiter=200):
    """Unpreconditioned BiCGStab returning the iterate with the smallest residual.

    Stops once ``‖b - A x‖ <= tol ‖b‖``. Returns ``(x, info)``.
    """
    b = np.asarray(b)
    bnorm = np.linalg.norm(b)
    dtype = np.result_type(b, np.float64) if x0 is None else np.result_type(b, x0)
    x = np.zeros_like(b, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)
    if bnorm == 0:
        return np.zeros_like(x), LocalSolveInfo("bicgstab", 0, 0.0, True)
    r = b - matvec(x)
    res = np.linalg.norm(r) / bnorm
    best_x, best_res = x.copy(), res
    if res <= tol:
        return x, LocalSolveInfo("bicgstab", 0, res, True)
    breakdown = False
    restarts = 0
    it = 0
    while it < maxiter:
        rhat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros_like(x)
        p = np.zeros_like(x)
        broke = False
        while it < maxiter:
            it += 1
            rho_new = np.vdot(rhat, r)
            if abs(rho_new) <= 1e-300 or omega == 0:
                broke = True
                break
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
            v = matvec(p)
            den = np.vdot(rhat, v)
            if abs(den) <= 1e-300:
                broke = True
                break
            alpha = rho_new / den
            s = r - alpha * v
            sres = np.linalg.norm(s) / bnorm
            if sres <= tol:
                x = x + alpha * p
                return x, LocalSolveInfo("bicgstab", it, sres, True, breakdown)
            t = matvec(s)
            tt_ = np.vdot(t, t)
            omega = np.vdot(t, s) / tt_ if tt_ != 0 else 0.0
            x = x + alpha * p + omega * s
            r = s - omega * t
            rho = rho_new
            res = np.linalg.norm(r) / bnorm
            if res < best_res:
                best_x, best_res = x.copy(), res
            if res <= tol:
                return x, LocalSolveInfo("bicgstab", it, res, True, breakdown)
            if not np.isfinite(res):
                broke = True
                break
        if not broke:
            break
        breakdown = True
        if restarts >= 1:
            break
        restarts += 1
        x = best_x.copy()
        r = b - matvec(x)
    return best_x, LocalSolveInfo("bicgstab", it, best_res, False, breakdown)


def local_solve(A_k: LocalOperator, g_k, u_prev, cfg: LocalSolveConfig):
    """Solve the projected system to relative residual ``eps / eta``.

    Small systems are densified and solved by LU; larger ones run BiCGStab
    from ``u_prev``.
    """
    g_k = np.asarray(g_k).ravel()
    u_prev = np.asarray(u_prev).ravel()
    n = g_k.size
    if n <= cfg.direct_threshold:
        M = A_k.dense() if isinstance(A_k, LocalOperator) else np.asarray(A_k)
        try:
            u = sla.solve(M, g_k, check_finite=False)
        except (sla.LinAlgError, ValueError):
            u, *_ = np.linalg.lstsq(M, g_k, rcond=None)
            log.warning("singular local system of size %d, using least squares", n)
        gn = np.linalg.norm(g_k)
        res = np.linalg.norm(g_k - M @ u) / gn if gn > 0 else 0.0
        return u, LocalSolveInfo("direct", 0, res, True)
    matvec = A_k.matvec if isinstance(A_k, LocalOperator) else (lambda v: A_k @ v)
    u, info = bicgstab(matvec, g_k, u_prev, cfg.tol, cfg.max_inner_iters)
    if not info.converged:
        log.warning("local BiCGStab stopped at residual %.3e after %d iterations",
                    info.residual, info.iterations)
    return u, info


def truncate_core(u, eps, d=1, rmax=None):
    """SVD truncation of a core ``(r0, n, r1)`` along its trailing bond.

    Returns ``(U, V)`` with ``U`` a left-orthogonal core and ``V`` the
    ``r' x r1`` factor to be pushed into the next core; the discarded part
    satisfies ``‖u - U V‖ <= eps ‖u‖ / sqrt(d)``.
    """
    r0, n, r1 = u.shape
    mat = u.reshape(r0 * n, r1)
    U, s, Vt = tt._svd(mat)
    tol = eps * np.linalg.norm(s) / np.sqrt(max(d, 1))
    r = tt._truncation_rank(s, tol)
    if rmax is not None:
        r = max(1, min(r, rmax))
    return U[:, :r].reshape(r0, n, r), s[:r, None] * Vt[:r]


_ONES3 = np.ones((1, 1, 1))
_ONES2 = np.ones((1, 1))


class SweepState:
    """Workspace of one alternating iteration on ``B x = sum(rhs_terms)``.

    ``x`` and ``z`` are lists of cores and are updated in place. The first
    right-hand side term is expected to be ``x0 (x) (S e)``; further terms
    are source contributions.
    """

    def __init__(self, B: TTOperator, rhs_terms, x: TTVector, z: TTVector, constraints=()):
        self.B = list(B.cores)
        self.G = [list(t.cores) for t in rhs_terms]
        self.x = list(x.cores)
        self.z = list(z.cores)
        D = len(self.x)
        if len(self.B) != D or len(self.z) != D or any(len(g) != D for g in self.G):
            raise tt.TTShapeError("solution, residual, operator and rhs must have equal length")
        self.D = D
        self.d = D - 1
        # constraints live on the spatial cores only; right-orthogonal for a
        # well-conditioned concatenation QR
        self.c = [tt.orthogonalize(c, 0, direction="right").cores for c in constraints]
        for c in self.c:
            if len(c) != self.d:
                raise tt.TTShapeError("constraint vectors must have the spatial modes only")
        nt = len(self.G)
        self.xbx_l = [None] * (D + 1)
        self.xbx_r = [None] * (D + 1)
        self.zbx_l = [None] * (D + 1)
        self.zbx_r = [None] * (D + 1)
        self.xg_l = [[None] * (D + 1) for _ in range(nt)]
        self.xg_r = [[None] * (D + 1) for _ in range(nt)]
        self.zg_l = [[None] * (D + 1) for _ in range(nt)]
        self.zg_r = [[None] * (D + 1) for _ in range(nt)]
        for lst in (self.xbx_l, self.zbx_l):
            lst[0] = _ONES3
        for lst in (self.xbx_r, self.zbx_r):
            lst[D] = _ONES3
        for t in range(nt):
            self.xg_l[t][0] = self.zg_l[t][0] = _ONES2
            self.xg_r[t][D] = self.zg_r[t][D] = _ONES2
        self.proj = [_ONES2 for _ in self.c]
        self.proj_history = [[_ONES2] for _ in self.c]

    # -- trains -----------------------------------------------------------
    @property
    def solution(self) -> TTVector:
        return TTVector(list(self.x))

    @property
    def residual(self) -> TTVector:
        return TTVector(list(self.z))

    @property
    def ranks(self):
        return (1,) + tuple(c.shape[2] for c in self.x)

    # -- environments -----------------------------------------------------
    def update_right(self, k):
        """Right environments at bond ``k`` from core ``k`` and bond ``k+1``."""
        xk, zk, Bk = self.x[k], self.z[k], self.B[k]
        self.xbx_r[k] = tt.env_right_op(self.xbx_r[k + 1], xk, Bk, xk)
        self.zbx_r[k] = tt.env_right_op(self.zbx_r[k + 1], zk, Bk, xk)
        for t, G in enumerate(self.G):
            self.xg_r[t][k] = tt.env_right_vec(self.xg_r[t][k + 1], xk, G[k])
            self.zg_r[t][k] = tt.env_right_vec(self.zg_r[t][k + 1], zk, G[k])

    def update_left(self, k):
        """Left environments at bond ``k+1`` from bond ``k`` and core ``k``."""
        xk, zk, Bk = self.x[k], self.z[k], self.B[k]
        self.xbx_l[k + 1] = tt.env_left_op(self.xbx_l[k], xk, Bk, xk)
        self.zbx_l[k + 1] = tt.env_left_op(self.zbx_l[k], zk, Bk, xk)
        for t, G in enumerate(self.G):
            self.xg_l[t][k + 1] = tt.env_left_vec(self.xg_l[t][k], xk, G[k])
            self.zg_l[t][k + 1] = tt.env_left_vec(self.zg_l[t][k], zk, G[k])

    # -- local quantities -------------------------------------------------
    def local_operator(self, k) -> LocalOperator:
        return LocalOperator(self.xbx_l[k], self.B[k], self.xbx_r[k + 1])

    def local_rhs(self, k, left_override=None):
        out = 0
        for t, G in enumerate(self.G):
            L = self.xg_l[t][k]
            if t == 0 and left_override is not None:
                L = left_override
            out = out + tt.local_rhs(L, G[k], self.xg_r[t][k + 1])
        return out


def right_pass(state: SweepState):
    """Make ``x`` and ``z`` right-orthogonal from the last core down to core 1.

    Refreshes all right environments; left environments are reset.
    """
    for k in range(state.D - 1, 0, -1):
        L, state.x[k] = tt.orth_right_core(state.x[k])
        state.x[k - 1] = np.tensordot(state.x[k - 1], L, axes=(2, 0))
        Lz, state.z[k] = tt.orth_right_core(state.z[k])
        state.z[k - 1] = np.tensordot(state.z[k - 1], Lz, axes=(2, 0))
        state.update_right(k)
    state.proj = [_ONES2 for _ in state.c]
    state.proj_history = [[_ONES2] for _ in state.c]
    return state


def residual_cores(state: SweepState, k, u):
    """Projections of ``g - B x`` with core ``k`` of ``x`` replaced by ``u``.

    Returns ``(zhat, zk)``: the ALS update of core ``k`` of the residual
    train (``Z`` frames on both sides) and the reduced residual core
    (``X`` frame on the left, ``Z`` frame on the right).
    """
    Bk = state.B[k]
    zhat = -LocalOperator(state.zbx_l[k], Bk, state.zbx_r[k + 1]).matvec(u)
    zk = -LocalOperator(state.xbx_l[k], Bk, state.zbx_r[k + 1]).matvec(u)
    zhat = zhat.reshape(state.zbx_l[k].shape[0], Bk.shape[1], state.zbx_r[k + 1].shape[0])
    zk = zk.reshape(state.xbx_l[k].shape[0], Bk.shape[1], state.zbx_r[k + 1].shape[0])
    for t, G in enumerate(state.G):
        zhat = zhat + tt.local_rhs(state.zg_l[t][k], G[k], state.zg_r[t][k + 1])
        zk = zk + tt.local_rhs(state.xg_l[t][k], G[k], state.zg_r[t][k + 1])
    return zhat, zk


def enrich(state: SweepState, k, U, V, zk, r_max=None):
    """Augment core ``k`` by residual and constraint blocks and re-orthogonalize.

    ``U`` is the truncated left-orthogonal core, ``V`` the factor still to be
    pushed into core ``k+1``. The block order is ``[U | zk | P_1 c_1 | ...]``;
    the partial projections of the constraints onto the new left interface
    are read off the corresponding columns of the R factor. The represented
    vector is unchanged.
    """
    r0, n, r1 = U.shape
    cblocks = [np.tensordot(P, c[k], axes=(1, 0)) for P, c in zip(state.proj, state.c)]
    width_c = sum(b.shape[2] for b in cblocks)
    if r_max is not None:
        keep = max(0, r_max - r1 - width_c)
        zk = zk[:, :, :keep]
    blocks = [U, zk] + cblocks
    dtype = np.result_type(*blocks)
    M = np.concatenate([b.astype(dtype, copy=False) for b in blocks], axis=2)
    Q, R = np.linalg.qr(M.reshape(r0 * n, -1))
    state.x[k] = Q.reshape(r0, n, Q.shape[1])
    nxt = np.tensordot(V, state.x[k + 1], axes=(1, 0))
    state.x[k + 1] = np.tensordot(R[:, :r1], nxt, axes=(1, 0))
    off = r1 + zk.shape[2]
    new_proj = []
    for b in cblocks:
        w = b.shape[2]
        new_proj.append(R[:, off:off + w])
        off += w
    state.proj = new_proj
    for h, P in zip(state.proj_history, new_proj):
        h.append(P)
    return state


@dataclass
class SweepStats:
    local_residual: float = 0.0
    inner_iterations: int = 0
    local_flags: int = 0
    max_rank: int = 1


def forward_sweep(state: SweepState, cfg: LocalSolveConfig, r_max=None) -> SweepStats:
    """Update the spatial cores ``0..d-1`` left to right.

    Expects a preceding :func:`right_pass`. On return cores ``0..d-1`` are
    left-orthogonal and the left environments at bond ``d`` are current;
    the temporal core still holds the previous values in the new basis.
    """
    stats = SweepStats()
    d = state.d
    for k in range(d):
        A_k = state.local_operator(k)
        g_k = state.local_rhs(k)
        u_prev = state.x[k]
        gn = np.linalg.norm(g_k)
        if gn > 0:
            prev_res = np.linalg.norm(g_k.ravel() - A_k.matvec(u_prev)) / gn
        else:
            prev_res = np.linalg.norm(u_prev)
        stats.local_residual = max(stats.local_residual, prev_res)
        u, info = local_solve(A_k, g_k, u_prev, cfg)
        stats.inner_iterations += info.iterations
        stats.local_flags += int(not info.converged)
        u = u.reshape(u_prev.shape)
        width_c = sum(c[k].shape[2] for c in state.c)
        cap = None if r_max is None else max(1, r_max - width_c)
        U, V = truncate_core(u, cfg.eps, d, cap)
        u_approx = np.tensordot(U, V, axes=(2, 0))
        zhat, zk = residual_cores(state, k, u_approx)
        enrich(state, k, U, V, zk, r_max)
        Qz, Rz = np.linalg.qr(zhat.reshape(-1, zhat.shape[2]))
        state.z[k] = Qz.reshape(zhat.shape[0], zhat.shape[1], Qz.shape[1])
        state.z[k + 1] = np.tensordot(Rz, state.z[k + 1], axes=(1, 0))
        state.update_left(k)
        stats.max_rank = max(stats.max_rank, state.x[k].shape[2])
    return stats


def initial_residual_guess(dims, rho, rng=None, dtype=float) -> TTVector:
    """Random residual train with bond ranks ``min(rho, attainable)``."""
    dims = list(dims)
    D = len(dims)
    ranks = []
    for k in range(1, D):
        left = int(np.prod(dims[:k], dtype=np.int64))
        right = int(np.prod(dims[k:], dtype=np.int64))
        ranks.append(int(min(rho, left, right)))
    z = tt.random_tt(dims, ranks, rng, dtype)
    return tt.orthogonalize(z, 0, direction="right")
