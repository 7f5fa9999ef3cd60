import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tamen.chebyshev import (
    ChebyshevGrid, barycentric_weights, cheb_diff_matrix, cheb_nodes, interpolate,
)


def test_nodes_ascending_and_end():
    t = cheb_nodes(16, 1.0)
    assert np.all(np.diff(t) > 0)
    assert t[-1] == 1.0 and t[0] > 0


def test_single_point():
    assert np.array_equal(cheb_diff_matrix(1, 1.0), [[1.0]])
    g = ChebyshevGrid(1, 1.0)
    assert g.S @ g.nodes == pytest.approx([1.0])


def test_corner_and_scaling():
    I = 7
    S = cheb_diff_matrix(I, 1.0)
    assert S[-1, -1] == pytest.approx(2 * (2 * I ** 2 + 1) / 6)
    np.testing.assert_allclose(cheb_diff_matrix(I, 2.5), cheb_diff_matrix(I, 1.0) / 2.5, rtol=1e-14)


@pytest.mark.parametrize("I", range(1, 17))
def test_polynomial_exactness(I):
    T = 1.0
    g = ChebyshevGrid(I, T)
    t = g.nodes
    for k in range(1, I + 1):
        err = np.max(np.abs(g.S @ t ** k - k * t ** (k - 1)))
        assert err <= 1e-9 * max(1, k)


def _lagrange_derivative(nodes, t):
    """Derivative of the interpolant through (0, 0) and (nodes, 1) at nodes ``t``."""
    pts = np.concatenate([[0.0], nodes])
    vals = np.concatenate([[0.0], np.ones_like(nodes)])
    coef = np.polyfit(pts, vals, len(pts) - 1)
    return np.polyval(np.polyder(coef), t)


def test_row_sum_is_derivative_of_pinned_constant():
    g = ChebyshevGrid(6, 1.0)
    np.testing.assert_allclose(g.Se, _lagrange_derivative(g.nodes, g.nodes), atol=1e-8)


def test_spectral_decay():
    errs = []
    for I in (4, 8, 16):
        g = ChebyshevGrid(I, 1.0)
        y = np.exp(g.nodes) - 1
        errs.append(np.max(np.abs(g.S @ y - np.exp(g.nodes))))
    for a, b in zip(errs, errs[1:]):
        assert b <= a / 10 or b <= 1e-12


def test_interpolation():
    g = ChebyshevGrid(4, 2.0)
    vals = g.nodes ** 2
    assert g.interpolate(vals, g.nodes[2]) == vals[2]
    assert abs(g.interpolate(vals, 1.0) - 1.0) <= 1e-12
    assert g.interpolate(np.full(4, 3.0), 0.3) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        g.interpolate(vals, 2.5)


@settings(max_examples=30, deadline=None)
@given(I=st.integers(2, 20), T=st.floats(0.01, 100.0), x=st.floats(0, 1))
def test_interpolation_reproduces_polynomials(I, T, x):
    nodes = cheb_nodes(I, T)
    c = np.arange(1, I + 1, dtype=float) / I
    p = np.polynomial.Polynomial(c[: I])
    val = interpolate(p(nodes / T), x * T, nodes, barycentric_weights(nodes), T)
    assert abs(val - p(x)) <= 1e-8 * max(1.0, np.abs(c).sum())


def test_invalid_arguments():
    with pytest.raises(ValueError):
        cheb_nodes(0, 1.0)
    with pytest.raises(ValueError):
        cheb_diff_matrix(4, 0.0)
