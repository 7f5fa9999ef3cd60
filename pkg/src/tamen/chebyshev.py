"""Chebyshev collocation in time on ``(0, T]``.

The grid drops the left end point ``t = 0``: the unknown is shifted so that it
vanishes there, and the corresponding row and column of the usual Chebyshev
differentiation matrix are removed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check(I, T):
    if int(I) != I or I < 1:
        raise ValueError(f"number of Chebyshev points must be a positive integer, got {I}")
    if not T > 0:
        raise ValueError(f"interval length must be positive, got {T}")


def reference_nodes(I: int) -> np.ndarray:
    """Nodes ``-cos(pi i / I)``, ``i = 1..I``, on ``(-1, 1]``."""
    i = np.arange(1, I + 1)
    t = -np.cos(np.pi * i / I)
    t[-1] = 1.0
    return t


def cheb_nodes(I: int, T: float) -> np.ndarray:
    _check(I, T)
    t = (reference_nodes(I) + 1.0) * (T / 2.0)
    t[-1] = T
    return t


def cheb_diff_matrix(I: int, T: float) -> np.ndarray:
    """Differentiation matrix on :func:`cheb_nodes` for functions vanishing at 0."""
    _check(I, T)
    th = reference_nodes(I)
    S = np.empty((I, I))
    idx = np.arange(1, I + 1)
    sign = (-1.0) ** (idx[:, None] + idx[None, :])
    wt = np.ones(I)
    wt[-1] = 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        S = (wt[:, None] / wt[None, :]) * sign / (th[:, None] - th[None, :])
    diag = np.empty(I)
    diag[:-1] = -th[:-1] / (2.0 * (1.0 - th[:-1] ** 2))
    diag[-1] = (2.0 * I ** 2 + 1.0) / 6.0
    S[np.diag_indices(I)] = diag
    return S * (2.0 / T)


def barycentric_weights(nodes) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    # scale by the interval length to keep products in range
    scale = max(np.ptp(nodes), 1e-300) / 4.0 if nodes.size > 1 else 1.0
    w = 1.0 / np.prod(diff / scale, axis=1)
    return w / np.max(np.abs(w))


@dataclass(frozen=True)
class ChebyshevGrid:
    I: int
    T: float
    nodes: np.ndarray = field(init=False, repr=False)
    S: np.ndarray = field(init=False, repr=False)
    Se: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check(self.I, self.T)
        object.__setattr__(self, "nodes", cheb_nodes(self.I, self.T))
        S = cheb_diff_matrix(self.I, self.T)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "Se", S.sum(axis=1))
        object.__setattr__(self, "weights", barycentric_weights(self.nodes))

    def interpolate(self, values, t):
        return interpolate(values, t, self.nodes, self.weights, self.T)


def interpolate(values, t, nodes, weights=None, T=None):
    """Evaluate the degree ``I-1`` interpolant through ``(nodes, values)`` at ``t``.

    ``values`` may carry trailing axes (e.g. one column per spatial
    coefficient); the first axis runs over the nodes.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values)
    T = nodes[-1] if T is None else T
    if not 0.0 <= t <= T:
        raise ValueError(f"time {t} outside the interval [0, {T}]")
    hit = np.nonzero(nodes == t)[0]
    if hit.size:
        return values[hit[0]]
    if weights is None:
        weights = barycentric_weights(nodes)
    c = weights / (t - nodes)
    return np.tensordot(c, values, axes=(0, 0)) / c.sum()
