"""Reusable drivers for the convection and CME benchmarks.

These glue the models to :func:`propagate` and to the full-format
reference propagators; the CLI, the demos and the acceptance tests share
them.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import tt
from .integrator import IntegratorConfig, InvariantSpec, exp_uniform_intervals, propagate
from .models import cme
from .models.baselines import crank_nicolson_block, expm_taylor
from .models.convection import ConvectionModel, exact_solution


@dataclass
class RunRecord:
    t_end: list = field(default_factory=list)
    mass_drift: list = field(default_factory=list)
    norm_drift: list = field(default_factory=list)
    max_rank: list = field(default_factory=list)
    sweeps: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    storage: list = field(default_factory=list)
    states: list = field(default_factory=list)
    trajectory: object = None
    wall: float = 0.0


def _record(traj, x0, mass_vec, keep_states):
    rec = RunRecord(trajectory=traj)
    m0 = tt.dot(mass_vec, x0)
    n0 = tt.norm(x0)
    for st in traj.steps:
        rec.t_end.append(st.t_end)
        rec.mass_drift.append(float(abs(tt.dot(mass_vec, st.state) - m0) / abs(m0)))
        rec.norm_drift.append(float(abs(tt.norm(st.state) - n0) / n0))
        rec.max_rank.append(st.report.max_rank)
        rec.sweeps.append(st.report.sweeps)
        rec.residual.append(st.report.residual)
        rec.storage.append(st.report.storage)
        if keep_states:
            rec.states.append(st.state)
    return rec


def convection_run(L=8, steps=20, eps=1e-5, eta=1e3, rho=4, I=16, interval=0.05,
                   conserve=True, keep_states=False, seed=0):
    m = ConvectionModel(L)
    inv = InvariantSpec([m.mass_vector] if conserve else [], conserve_norm=conserve)
    cfg = IntegratorConfig(eps=eps, eta=eta, rho=rho, I=I, seed=seed)
    start = time.perf_counter()
    traj = propagate(m.operator, None, m.initial, [interval] * steps, inv, cfg)
    rec = _record(traj, m.initial, m.mass_vector, keep_states)
    rec.wall = time.perf_counter() - start
    return m, rec


def convection_reference(m: ConvectionModel, t: float, eps=1e-14):
    """Semi-discrete solution at ``t`` by the full-format Taylor propagator."""
    return expm_taylor(m.sparse_operator(), m.dense_initial(), t, eps)


def relative_error(u: tt.TTVector, ref: np.ndarray) -> float:
    return float(np.linalg.norm(tt.to_dense(u) - ref) / np.linalg.norm(ref))


def spatial_order_errors(levels=(7, 8, 9), eps=1e-5, I=16, interval=0.05):
    """One-period errors against the exact translated Gaussian."""
    errs = []
    for L in levels:
        m, rec = convection_run(L, int(round(20.0 / interval)), eps=eps, I=I,
                                interval=interval, keep_states=False)
        u = rec.trajectory.final_state
        errs.append(relative_error(u, exact_solution(L, rec.t_end[-1])))
    return errs


def cme_run(sizes=(8, 16, 8, 8, 8), steps=20, eps=1e-5, eta=10.0, rho=3, I=80,
            enrich=True, seed=0, model=None):
    model = model or cme.lambda_phage()
    A = model.operator(sizes)
    psi0 = cme.multinomial_initial(sizes)
    e = tt.ones(sizes)
    inv = InvariantSpec([e] if enrich else [], extra=cme.index_vectors(sizes) if enrich else [])
    cfg = IntegratorConfig(eps=eps, eta=eta, rho=rho, I=I, seed=seed)
    intervals = exp_uniform_intervals(steps)
    start = time.perf_counter()
    traj = propagate(A, None, psi0, intervals, inv, cfg)
    rec = _record(traj, psi0, e, keep_states=True)
    rec.wall = time.perf_counter() - start
    return model, intervals, rec


def cme_reference_means(model, sizes, intervals, eps=1e-14):
    """Mean copy numbers after every interval from the sparse Taylor propagator."""
    S = model.sparse_operator(sizes)
    v = tt.to_dense(cme.multinomial_initial(sizes))
    out = []
    for T in intervals:
        v = expm_taylor(S, v, T, eps)
        out.append(cme.dense_means(v, sizes))
    return np.array(out)


CN_COLUMNS = ["method", "time_points", "error", "meets_target", "trajectory_entries", "max_rank"]


def crank_nicolson_comparison(m: ConvectionModel, rec: RunRecord, t_end: float, target: float,
                              eps: float, I: int, max_points: int = 25600, path=None):
    """Compare tAMEn with Crank-Nicolson on the same time span.

    Crank-Nicolson step counts double from the tAMEn node count until the
    error against the Taylor reference drops to ``target`` or the budget
    ``max_points`` is exhausted. The cost measure is the number of stored
    trajectory entries: ``N`` per Crank-Nicolson step, the core entries of
    every space-time train for tAMEn. Returns the rows (also written to
    ``path`` as CSV when given).
    """
    ref = convection_reference(m, t_end)
    A = m.sparse_operator()
    u0 = m.dense_initial()
    N = u0.size
    tamen_err = relative_error(rec.trajectory.final_state, ref)
    rows = [["tamen", len(rec.t_end) * I, tamen_err, tamen_err <= target,
             int(sum(rec.storage)), int(max(rec.max_rank))]]
    points = len(rec.t_end) * I
    while True:
        u = crank_nicolson_block(A, u0, t_end, points, return_all=False)
        err = float(np.linalg.norm(u - ref) / np.linalg.norm(ref))
        rank = tt.round(tt.qtt_fold(u, eps), eps).max_rank
        rows.append(["crank-nicolson", points, err, err <= target, N * points, rank])
        if err <= target or points * 2 > max_points:
            break
        points *= 2
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CN_COLUMNS)
            for r in rows:
                w.writerow([r[0], r[1], f"{r[2]:.15e}", int(r[3]), r[4], r[5]])
    return rows
