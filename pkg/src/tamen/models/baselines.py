"""Full-format reference propagators on sparse matrices."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def _as_operator(A):
    if sp.issparse(A):
        return A.tocsr()
    return np.asarray(A)


def _norm1(A):
    if sp.issparse(A):
        return float(abs(A).sum(axis=0).max()) if A.shape[0] else 0.0
    return float(np.abs(A).sum(axis=0).max()) if A.size else 0.0


def expm_taylor(A, v, t: float, eps: float = 1e-14, max_terms: int = 200):
    """``exp(t A) v`` by a truncated Taylor series on sub-steps.

    The interval is split into ``s`` pieces with ``(t/s) ‖A‖_1 <= 1``; on
    each piece the series stops once a term falls below ``eps`` times the
    accumulated sum.
    """
    A = _as_operator(A)
    v = np.asarray(v)
    dtype = np.result_type(v, A.dtype, float)
    out = v.astype(dtype, copy=True)
    if t == 0:
        return out
    nrm = abs(t) * _norm1(A)
    steps = max(1, int(np.ceil(nrm)))
    h = t / steps
    for _ in range(steps):
        term = out
        acc = out.copy()
        for k in range(1, max_terms + 1):
            term = (h / k) * (A @ term)
            acc += term
            if np.linalg.norm(term) <= eps * np.linalg.norm(acc):
                break
        else:
            raise RuntimeError("Taylor series did not converge")
        out = acc
    return out


def crank_nicolson_block(A, u0, T: float, I: int, return_all: bool = True):
    """Crank-Nicolson with ``I`` steps of ``dt = T / I``.

    Returns the ``(I + 1) x N`` trajectory including ``u0`` (or only the
    final state when ``return_all`` is false).
    """
    if I < 1:
        raise ValueError("at least one step is required")
    A = _as_operator(A)
    u = np.asarray(u0)
    N = u.size
    dt = T / I
    if sp.issparse(A):
        Id = sp.identity(N, format="csc", dtype=A.dtype)
        lhs = (Id - 0.5 * dt * A).tocsc()
        rhs = (Id + 0.5 * dt * A).tocsr()
        try:
            solve = spla.splu(lhs).solve
        except RuntimeError as exc:
            raise np.linalg.LinAlgError("singular Crank-Nicolson step matrix") from exc
    else:
        import scipy.linalg as sla

        Id = np.eye(N)
        lu = sla.lu_factor(Id - 0.5 * dt * A)
        rhs = Id + 0.5 * dt * A
        solve = lambda b: sla.lu_solve(lu, b)
    traj = [u] if return_all else None
    dtype = np.result_type(u, A.dtype)
    u = u.astype(dtype)
    for _ in range(I):
        u = solve(rhs @ u)
        if return_all:
            traj.append(u)
    return np.array(traj) if return_all else u
