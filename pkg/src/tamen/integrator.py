"""Time integration of ``dx/dt = A(t) x + f`` in tensor-train format.

Each interval ``[t0, t0 + T]`` is discretized by Chebyshev collocation and
the resulting space-time system is solved by alternating sweeps. The spatial
basis is enriched by the residual and by user-supplied detecting vectors
(``A^* c = 0``), so that the linear invariants ``c^* x`` are reproduced to
machine precision; optionally the Euclidean norm is restored by rescaling
the non-invariant part of the projected initial state.
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from . import tt
from .amen import (
    LocalSolveConfig,
    SweepState,
    forward_sweep,
    initial_residual_guess,
    right_pass,
)
from .chebyshev import ChebyshevGrid
from .spacetime import TimeAffineOperator, build_problem, global_residual_norm
from .tt import LocalOperator, TTVector

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    pass


class DegenerateRescalingWarning(RuntimeWarning):
    pass


@dataclass
class IntegratorConfig:
    eps: float = 1e-5
    eta: float = 10.0
    rho: int = 4
    I: int = 16
    max_sweeps: int = 10
    max_picard: int = 20
    r_max: int = 512
    direct_threshold: int = 1000
    max_inner_iters: int = 200
    seed: int | None = 0
    stop: str = "global"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.eta > 1:
            raise ValueError("eta must exceed 1")
        if self.rho < 1:
            raise ValueError("rho must be at least 1")
        if self.I < 1:
            raise ValueError("I must be at least 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.stop not in ("global", "local"):
            raise ValueError("stop must be 'global' or 'local'")

    def local(self) -> LocalSolveConfig:
        return LocalSolveConfig(self.eps, self.eta, self.direct_threshold, self.max_inner_iters)


@dataclass
class InvariantSpec:
    """Conserved quantities of the flow.

    ``constraints`` are detecting vectors (``A^* c = 0``) whose values are
    reproduced exactly. ``extra`` vectors join the basis enrichment without
    any conservation claim; they make the corresponding observables ``c^* x``
    more accurate.
    """

    constraints: list = field(default_factory=list)
    conserve_norm: bool = False
    x0_norm: float | None = None
    extra: list = field(default_factory=list)

    def __post_init__(self):
        self.constraints = list(self.constraints)
        self.extra = list(self.extra)

    def check_shapes(self, dims):
        for c in self.constraints + self.extra:
            if tuple(c.n) != tuple(dims):
                raise tt.TTShapeError(f"constraint modes {c.n} do not match {tuple(dims)}")

    def verify_kernel(self, A: TimeAffineOperator, rtol: float = 1e-10) -> list:
        """Relative size of ``A_p^* c_m`` for every term and constraint.

        The scale is ``‖A_p‖_F ‖c_m‖`` (Frobenius norm of the operator
        train). Raises if any value exceeds ``rtol``.
        """
        out = []
        for c in self.constraints:
            cn = tt.norm(c)
            worst = 0.0
            for Ap in A.operators:
                an = tt.norm(TTVector([a.reshape(a.shape[0], -1, a.shape[3]) for a in Ap.cores]))
                val = tt.norm(tt.apply(Ap.H, c))
                worst = max(worst, val / (an * cn) if an * cn > 0 else val)
            out.append(worst)
        if any(v > rtol for v in out):
            raise ValueError(f"constraint vectors are not in the co-kernel: {out}")
        return out


@dataclass
class StepReport:
    sweeps: int = 0
    residual: float = np.inf
    local_residual: float = np.inf
    max_rank: int = 1
    ranks: tuple = ()
    storage: int = 0
    invariant_values: list = field(default_factory=list)
    invariant_drift: list = field(default_factory=list)
    norm_drift: float = 0.0
    theta: float = 1.0
    wall_time: float = 0.0
    converged: bool = False
    rescale_skipped: bool = False
    local_flags: int = 0
    inner_iterations: int = 0
    residual_history: list = field(default_factory=list)
    residual_train: TTVector | None = field(default=None, repr=False)


def norm_correction(v0, projections, x0_norm, degeneracy_tol=1e-12):
    """Rescale the component of ``v0`` orthogonal to the constraint span.

    ``projections`` holds the Galerkin projections of the constraint vectors
    as columns (``r x M``, possibly ``M = 0``). Returns ``(v_hat, theta)``
    with ``‖v_hat‖ = x0_norm`` and unchanged constraint coefficients. If the
    free part is negligible relative to ``x0_norm`` the rescaling is skipped
    with a warning and ``theta = 1``.
    """
    v0 = np.asarray(v0)
    P = np.asarray(projections).reshape(v0.shape[0], -1)
    if P.shape[1]:
        Uc, s, _ = np.linalg.svd(P, full_matrices=False)
        Cb = Uc[:, s > 1e-12 * s[0]] if s.size and s[0] > 0 else Uc[:, :0]
    else:
        Cb = P
    coef = Cb.conj().T @ v0
    fixed = Cb @ coef
    free = v0 - fixed
    free_norm = np.linalg.norm(free)
    if x0_norm <= 0 or free_norm / x0_norm < degeneracy_tol:
        warnings.warn("norm correction skipped: free component is at round-off level",
                      DegenerateRescalingWarning, stacklevel=2)
        return v0.copy(), 1.0
    num = x0_norm ** 2 - np.linalg.norm(coef) ** 2
    if num < 0:
        warnings.warn("constraint part exceeds the target norm; norm correction skipped",
                      DegenerateRescalingWarning, stacklevel=2)
        return v0.copy(), 1.0
    theta = np.sqrt(num) / free_norm
    return fixed + theta * free, float(theta)


def reduced_temporal_matrix(left_env, temporal_core):
    """Dense ``sum_A L[:, A, :] (x) B_t[A]`` for unknowns ordered (basis, node)."""
    return LocalOperator(left_env, temporal_core, np.ones((1, 1, 1))).dense()


def temporal_solve(reduced_ops: Sequence, thetas: Sequence, v0, grid: ChebyshevGrid, f_proj=None):
    """Solve ``(I_r (x) S - sum_p K_p (x) diag(theta_p)) v = v0 (x) Se + f``.

    ``reduced_ops`` are the projected ``r x r`` operators ``X^* A_p X``.
    Returns ``v`` of shape ``(r, I)``; column ``i`` is the state at node ``i``.
    """
    v0 = np.asarray(v0)
    r = v0.shape[0]
    I = grid.I
    M = np.kron(np.eye(r), grid.S)
    for K, th in zip(reduced_ops, thetas):
        M = M - np.kron(np.asarray(K), np.diag(th))
    rhs = np.outer(v0, grid.Se).ravel()
    if f_proj is not None:
        rhs = rhs + np.asarray(f_proj).reshape(-1)
    try:
        v = sla.solve(M, rhs, check_finite=False)
    except sla.LinAlgError as exc:
        raise IntegrationError("singular reduced temporal system") from exc
    return v.reshape(r, I)


def _dense_solve(M, rhs):
    try:
        v = sla.solve(M, rhs, check_finite=False)
    except sla.LinAlgError as exc:
        raise IntegrationError("singular reduced temporal system") from exc
    if not np.all(np.isfinite(v)):
        raise IntegrationError("non-finite reduced temporal solution")
    return v


def initial_guess(x0: TTVector, I: int) -> TTVector:
    """``x0 (x) e``: the solution for ``A = 0``."""
    return TTVector(list(x0.cores) + [np.ones((1, I, 1), dtype=x0.dtype)])


def extract_state(x: TTVector, which=-1, eps: float = 0.0) -> TTVector:
    """Spatial state at Chebyshev node ``which`` (default: the end of the interval)."""
    v = x.cores[-1]
    I = v.shape[1]
    if not -I <= which < I:
        raise IndexError(f"node {which} out of range for {I} nodes")
    cores = list(x.cores[:-1])
    cores[-1] = np.tensordot(cores[-1], v[:, which, :], axes=(2, 0))
    out = TTVector(cores)
    if eps > 0:
        out = tt.round(out, eps)
    return out


def _constraint_values(x_cores, constraints, v):
    """``c_m^* x(t_i)`` at every node, via left environments of ``(c, X)``."""
    out = []
    d = len(x_cores) - 1
    for c in constraints:
        env = np.ones((1, 1))
        for k in range(d):
            env = tt.env_left_vec(env, c.cores[k], x_cores[k])
        out.append((env @ v).ravel())
    return out


def tamen_interval(A: TimeAffineOperator, f, x0: TTVector, grid: ChebyshevGrid,
                   inv: InvariantSpec | None = None, cfg: IntegratorConfig | None = None,
                   x_guess: TTVector | None = None, z_guess: TTVector | None = None,
                   t0: float = 0.0, rng=None):
    """Solve one interval. Returns the space-time train and a :class:`StepReport`.

    ``f`` is ``None`` or a space-time train whose last mode has ``grid.I``
    entries. The returned train has cores ``0..d-1`` left-orthogonal and the
    temporal core last.
    """
    inv = inv or InvariantSpec()
    cfg = cfg or IntegratorConfig(I=grid.I)
    start = time.perf_counter()
    dims = tuple(A.dims)
    if tuple(x0.n) != dims:
        raise tt.TTShapeError(f"initial state modes {x0.n} do not match operator {dims}")
    inv.check_shapes(dims)
    problem = build_problem(A, x0, grid, f, t0)
    d = x0.d
    dtype = np.result_type(x0.dtype, problem.B.dtype, *(t.dtype for t in problem.rhs_terms))
    x0_norm = inv.x0_norm if inv.x0_norm is not None else tt.norm(x0)
    if x0_norm == 0 and f is None:
        raise ValueError("initial state must be nonzero")

    if x_guess is None or x_guess.n != problem.rhs_terms[0].n:
        x_guess = initial_guess(x0, grid.I)
    if z_guess is None or z_guess.n != problem.rhs_terms[0].n:
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        z_guess = initial_residual_guess(problem.rhs_terms[0].n, cfg.rho, rng, dtype)
    x_guess = TTVector([c.astype(dtype, copy=False) for c in x_guess.cores])

    state = SweepState(problem.B, problem.rhs_terms, x_guess, z_guess,
                       inv.constraints + inv.extra)
    M_inv = len(inv.constraints)
    lcfg = cfg.local()
    report = StepReport()
    best = None
    for sweep in range(1, cfg.max_sweeps + 1):
        right_pass(state)
        stats = forward_sweep(state, lcfg, cfg.r_max)

        # temporal core: reduced Galerkin system, solved directly
        L = state.xbx_l[d]
        Bt = state.B[d]
        M = reduced_temporal_matrix(L, Bt)
        v0 = state.xg_l[0][d][:, 0]
        theta = 1.0
        if inv.conserve_norm:
            P = (np.concatenate([p.reshape(p.shape[0], -1) for p in state.proj[:M_inv]], axis=1)
                 if M_inv else np.zeros((v0.shape[0], 0)))
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                v0, theta = norm_correction(v0, P, x0_norm)
            if caught:
                report.rescale_skipped = True
                log.warning(str(caught[0].message))
        rhs = state.local_rhs(d, left_override=v0[:, None])
        old = state.x[d]
        gn = np.linalg.norm(rhs)
        temporal_res = np.linalg.norm(rhs.ravel() - M @ old.ravel()) / gn if gn > 0 else 0.0
        v = _dense_solve(M, rhs.ravel()).reshape(old.shape[0], grid.I, 1)
        state.x[d] = v
        # refresh the temporal core of the residual train
        zt = -LocalOperator(state.zbx_l[d], Bt, np.ones((1, 1, 1))).matvec(v)
        zt = zt.reshape(state.zbx_l[d].shape[0], grid.I, 1)
        for t, G in enumerate(state.G):
            zt = zt + tt.local_rhs(state.zg_l[t][d], G[d], np.ones((1, 1)))
        state.z[d] = zt

        local_res = max(stats.local_residual, temporal_res)
        x = state.solution
        if cfg.stop == "global":
            res = global_residual_norm(problem, x)
        else:
            res = local_res
        report.residual_history.append(res)
        report.sweeps = sweep
        report.residual = res
        report.local_residual = local_res
        report.theta = theta
        report.local_flags += stats.local_flags
        report.inner_iterations += stats.inner_iterations
        if best is None or res <= best[0]:
            best = (res, [c.copy() for c in state.x])
        if res <= cfg.eps:
            report.converged = True
            break
    if not report.converged:
        log.warning("interval did not converge: residual %.3e after %d sweeps",
                    report.residual, report.sweeps)
        if best[0] < report.residual:
            state.x = best[1]
            report.residual = best[0]

    x = state.solution
    report.ranks = x.ranks
    report.max_rank = x.max_rank
    report.storage = x.size
    vfin = x.cores[-1][:, :, 0]
    values = _constraint_values(x.cores, inv.constraints, vfin)
    ref = [tt.dot(c, x0) for c in inv.constraints]
    report.invariant_values = [val[-1] for val in values]
    report.invariant_drift = [
        float(np.max(np.abs(val - r0)) / abs(r0)) if r0 != 0 else float(np.max(np.abs(val)))
        for val, r0 in zip(values, ref)
    ]
    end_norm = np.linalg.norm(vfin[:, -1])
    report.norm_drift = float(abs(end_norm - x0_norm) / x0_norm) if x0_norm > 0 else 0.0
    report.residual_train = state.residual
    report.wall_time = time.perf_counter() - start
    return x, report


@dataclass
class TrajectoryStep:
    t_end: float
    state: TTVector
    report: StepReport
    invariant_values: list = field(default_factory=list)


@dataclass
class Trajectory:
    steps: list = field(default_factory=list)
    aborted: bool = False
    error: str | None = None

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter((s.state, s.report) for s in self.steps)

    @property
    def final_state(self):
        return self.steps[-1].state if self.steps else None


def exp_uniform_intervals(count: int, rate: float = 0.05) -> list:
    """Lengths ``exp(rate j) - exp(rate (j-1))``, ``j = 1..count``."""
    j = np.arange(count + 1)
    return list(np.diff(np.exp(rate * j)))


def propagate(A, f, x0: TTVector, intervals: Sequence[float], inv: InvariantSpec | None = None,
              cfg: IntegratorConfig | None = None, observers: Sequence[Callable] = (),
              t_start: float = 0.0, verify_kernel: bool = True) -> Trajectory:
    """Chain :func:`tamen_interval` over consecutive intervals.

    ``A`` is a :class:`TimeAffineOperator` (time profiles are evaluated in
    absolute time) or a bare operator train. Observers are called after each
    interval as ``obs(step, node_times, invariant_values, max_rank,
    residual)``. The run stops early, keeping the partial trajectory, if an
    interval fails.
    """
    if len(intervals) == 0:
        raise ValueError("at least one time interval is required")
    if isinstance(A, tt.TTOperator):
        A = TimeAffineOperator.stationary(A)
    inv = inv or InvariantSpec()
    cfg = cfg or IntegratorConfig()
    if inv.x0_norm is None:
        inv = InvariantSpec(inv.constraints, inv.conserve_norm, tt.norm(x0), inv.extra)
    if verify_kernel and inv.constraints:
        try:
            inv.verify_kernel(A)
        except ValueError as exc:
            warnings.warn(str(exc), RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(cfg.seed)
    traj = Trajectory()
    x_guess = z_guess = None
    state = x0
    t = t_start
    for step, T in enumerate(intervals, start=1):
        grid = ChebyshevGrid(cfg.I, float(T))
        fj = f(grid, t) if callable(f) else f
        try:
            x, rep = tamen_interval(A, fj, state, grid, inv, cfg, x_guess, z_guess, t0=t, rng=rng)
        except (IntegrationError, np.linalg.LinAlgError) as exc:
            traj.aborted = True
            traj.error = str(exc)
            log.error("interval %d failed: %s", step, exc)
            break
        x_guess, z_guess = x, rep.residual_train
        state = extract_state(x)
        t = t + float(T)
        values = _constraint_values(x.cores, inv.constraints, x.cores[-1][:, :, 0])
        traj.steps.append(TrajectoryStep(t, state, rep, [v[-1] for v in values]))
        for obs in observers:
            obs(step, t + grid.nodes - float(T), values, rep.max_rank, rep.residual)
    return traj


def picard_solve(A_of, f, x0: TTVector, grid: ChebyshevGrid, inv: InvariantSpec | None = None,
                 cfg: IntegratorConfig | None = None, t0: float = 0.0):
    """Picard iteration for quasi-linear ``dx/dt = A(x, t) x + f``.

    ``A_of(x_check, grid, t0)`` freezes the operator at a space-time iterate
    and returns a :class:`TimeAffineOperator`. A plain operator (not a
    callable) is linear, so a single pass is exact. Returns ``(x, report)``
    with ``report.picard_iterations`` and ``report.picard_converged`` set.
    """
    cfg = cfg or IntegratorConfig(I=grid.I)
    linear = isinstance(A_of, (TimeAffineOperator, tt.TTOperator))
    if isinstance(A_of, tt.TTOperator):
        A_of = TimeAffineOperator.stationary(A_of)
    x_check = initial_guess(x0, grid.I)
    z = None
    rng = np.random.default_rng(cfg.seed)
    report = None
    for it in range(1, cfg.max_picard + 1):
        A = A_of if linear else A_of(x_check, grid, t0)
        x, report = tamen_interval(A, f, x0, grid, inv, cfg, x_check, z, t0, rng)
        z = report.residual_train
        if linear:
            report.picard_iterations = 1
            report.picard_converged = True
            return x, report
        diff = tt.norm(tt.add(x, tt.scale(x_check, -1.0)))
        xn = tt.norm(x)
        x_check = x
        if diff <= cfg.eps * xn:
            report.picard_iterations = it
            report.picard_converged = True
            return x, report
    log.warning("Picard iteration did not converge in %d passes", cfg.max_picard)
    report.picard_iterations = cfg.max_picard
    report.picard_converged = False
    return x, report
