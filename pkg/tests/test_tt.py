import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tamen import tt
from conftest import random_operator, rel

dims_st = st.lists(st.integers(1, 5), min_size=1, max_size=4)


def _random(dims, rank, seed, dtype=float):
    return tt.random_tt(dims, rank, np.random.default_rng(seed), dtype)


# -- construction -------------------------------------------------------------

def test_rank_one_first_index_fastest():
    x = tt.rank_one([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(tt.to_dense(x), [3, 6, 4, 8])
    assert x.ranks == (1, 1, 1)


def test_rank_one_ones_and_unit():
    np.testing.assert_array_equal(tt.to_dense(tt.ones([2, 3])), np.ones(6))
    e = np.zeros(4)
    e[0] = 1
    dense = tt.to_dense(tt.rank_one([e, e]))
    assert dense[0] == 1 and dense.sum() == 1


def test_rank_one_rejects_empty():
    with pytest.raises(tt.TTShapeError):
        tt.rank_one([])
    with pytest.raises(tt.TTShapeError):
        tt.rank_one([np.array([])])


def test_invalid_cores_rejected():
    with pytest.raises(tt.TTShapeError):
        tt.TTVector([np.ones((2, 2, 1))])
    with pytest.raises(tt.TTShapeError):
        tt.TTVector([np.ones((1, 2, 2)), np.ones((3, 2, 1))])
    with pytest.raises(tt.TTShapeError):
        tt.ModeShape((2, 0))


def test_dense_guard():
    x = tt.ones([2] * 30)
    with pytest.raises(MemoryError):
        tt.to_dense(x)


def test_round_trip_dense(rng):
    x = tt.random_tt([4, 4, 4], 3, rng)
    a = tt.to_dense(x)
    y = tt.from_dense(a, (4, 4, 4), 1e-14)
    assert rel(tt.to_dense(y), a) <= 1e-12


def test_from_dense_exact_ranks(rng):
    f = [rng.standard_normal(n) for n in (3, 4, 5)]
    g = [rng.standard_normal(n) for n in (3, 4, 5)]
    a1 = tt.to_dense(tt.rank_one(f))
    assert tt.from_dense(a1, (3, 4, 5), 1e-14).max_rank == 1
    a2 = a1 + tt.to_dense(tt.rank_one(g))
    assert tt.from_dense(a2, (3, 4, 5), 1e-14).max_rank <= 2


def test_from_dense_gaussian_qtt_rank():
    q = np.linspace(-10, 10, 64, endpoint=False)
    x = tt.from_dense(np.exp(-q ** 2), [2] * 6, 1e-8)
    assert x.max_rank <= 8


def test_from_dense_shape_mismatch():
    with pytest.raises(tt.TTShapeError):
        tt.from_dense(np.ones(5), (2, 3))


@settings(max_examples=30, deadline=None)
@given(dims=dims_st, rank=st.integers(1, 4), seed=st.integers(0, 2 ** 31))
def test_round_trip_property(dims, rank, seed):
    x = _random(dims, rank, seed)
    a = tt.to_dense(x)
    b = tt.to_dense(tt.from_dense(tt.to_dense(tt.from_dense(a, dims, 1e-14)), dims, 1e-14))
    assert np.linalg.norm(b - a) <= 1e-12 * np.linalg.norm(a)


# -- algebra -------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(dims=dims_st, r1=st.integers(1, 4), r2=st.integers(1, 4),
       seed=st.integers(0, 2 ** 31), cplx=st.booleans())
def test_algebra_matches_dense(dims, r1, r2, seed, cplx):
    dtype = complex if cplx else float
    x = _random(dims, r1, seed, dtype)
    y = _random(dims, r2, seed + 1, dtype)
    xd, yd = tt.to_dense(x), tt.to_dense(y)
    s = tt.add(x, y)
    assert rel(tt.to_dense(s), xd + yd) <= 1e-12
    assert all(rs <= a + b for rs, a, b in zip(s.ranks[1:-1], x.ranks[1:-1], y.ranks[1:-1]))
    assert rel(tt.to_dense(tt.scale(x, 2.5 - 1j if cplx else 2.5)),
               (2.5 - 1j if cplx else 2.5) * xd) <= 1e-12
    ref = np.vdot(xd, yd)
    assert abs(tt.dot(x, y) - ref) <= 1e-12 * np.linalg.norm(xd) * np.linalg.norm(yd)
    assert abs(tt.norm(x) - np.linalg.norm(xd)) <= 1e-12 * np.linalg.norm(xd)


def test_add_shape_mismatch():
    with pytest.raises(tt.TTShapeError):
        tt.add(tt.ones([2, 3]), tt.ones([3, 2]))


def test_add_negation_rounds_to_zero(rng):
    x = tt.random_tt([3, 4, 3], 3, rng)
    z = tt.round(tt.add(x, tt.scale(x, -1.0)), 1e-12)
    assert tt.norm(z) <= 1e-12 * tt.norm(x)


def test_dot_rank_one():
    f = [np.array([1.0, 2.0]), np.array([3.0, -1.0, 2.0])]
    g = [np.array([0.5, 1.0]), np.array([1.0, 1.0, 1.0])]
    assert np.isclose(tt.dot(tt.rank_one(f), tt.rank_one(g)), (f[0] @ g[0]) * (f[1] @ g[1]))


@settings(max_examples=30, deadline=None)
@given(dims=st.lists(st.integers(1, 4), min_size=1, max_size=3), seed=st.integers(0, 2 ** 31))
def test_apply_matches_dense(dims, seed):
    rng = np.random.default_rng(seed)
    A = random_operator(dims, 2, rng)
    x = tt.random_tt(dims, 2, rng)
    y = tt.apply(A, x)
    assert rel(tt.to_dense(y), tt.op_to_dense(A) @ tt.to_dense(x)) <= 1e-12
    assert y.ranks == tuple(a * b for a, b in zip(A.ranks, x.ranks))


def test_apply_identity_and_zero(rng):
    x = tt.random_tt([3, 2, 4], 2, rng)
    y = tt.apply(tt.identity(x.n), x)
    np.testing.assert_array_equal(tt.to_dense(y), tt.to_dense(x))
    A = random_operator(x.n, 2, rng)
    assert tt.norm(tt.apply(A, tt.zeros(x.n))) == 0


def test_apply_shape_mismatch(rng):
    with pytest.raises(tt.TTShapeError):
        tt.apply(tt.identity([2, 3]), tt.ones([3, 2]))


def test_operator_algebra(rng):
    A = random_operator([2, 3], 2, rng)
    B = random_operator([2, 3], 2, rng)
    Ad, Bd = tt.op_to_dense(A), tt.op_to_dense(B)
    assert rel(tt.op_to_dense(tt.op_add(A, B)), Ad + Bd) <= 1e-12
    assert rel(tt.op_to_dense(tt.op_matmul(A, B)), Ad @ Bd) <= 1e-12
    assert rel(tt.op_to_dense(A.T), Ad.T) <= 1e-14
    assert rel(tt.op_to_dense(tt.op_round(tt.op_add(A, A), 1e-13)), 2 * Ad) <= 1e-12
    assert rel(tt.op_to_dense(tt.op_from_dense(Ad, (2, 3))), Ad) <= 1e-13


def test_kron_operator_ordering(rng):
    M1, M2 = rng.standard_normal((2, 2)), rng.standard_normal((3, 3))
    assert rel(tt.op_to_dense(tt.kron_operator([M1, M2])), np.kron(M2, M1)) <= 1e-15


# -- rounding and gauge ------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(dims=dims_st, rank=st.integers(1, 4), seed=st.integers(0, 2 ** 31),
       eps=st.sampled_from([1e-1, 1e-3, 1e-6, 1e-10]))
def test_round_error_bound(dims, rank, seed, eps):
    x = _random(dims, rank, seed)
    y = tt.round(x, eps)
    xd = tt.to_dense(x)
    assert np.linalg.norm(tt.to_dense(y) - xd) <= eps * np.linalg.norm(xd) * (1 + 1e-10) + 1e-15


def test_round_recovers_ranks(rng):
    x = tt.round(tt.random_tt([3, 4, 3, 2], 2, rng), 1e-14)
    y = tt.round(tt.add(x, x), 1e-12)
    assert y.ranks == x.ranks
    r1 = tt.rank_one([rng.standard_normal(3), rng.standard_normal(2)])
    assert rel(tt.to_dense(tt.round(r1, 1e-14)), tt.to_dense(r1)) <= 1e-14


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_orthogonalize_gauge_and_gram(rng, k):
    x = tt.random_tt([3, 4, 2, 3], 3, rng)
    y = tt.orthogonalize(x, k)
    assert rel(tt.to_dense(y), tt.to_dense(x)) <= 1e-13
    gl = tt.left_gram(y, k)
    gr = tt.right_gram(y, k)
    assert np.abs(gl - np.eye(gl.shape[0])).max() <= 1e-12
    assert np.abs(gr - np.eye(gr.shape[0])).max() <= 1e-12
    left = tt.interface_left(y, k)
    assert np.abs(left.T @ left - np.eye(left.shape[1])).max() <= 1e-12
    z = tt.orthogonalize(y, k)
    assert rel(tt.to_dense(z), tt.to_dense(y)) <= 1e-13


# -- frame projections ---------------------------------------------------------------

@pytest.mark.parametrize("k", [0, 1, 2])
def test_frame_projections_match_dense(rng, k):
    dims = (3, 3, 3)
    x = tt.orthogonalize(tt.random_tt(dims, 2, rng), k)
    b = tt.random_tt(dims, 2, rng)
    A = random_operator(dims, 2, rng)
    F = tt.frame_matrix(x, k)
    bk = tt.frame_project_rhs(b, x, k)
    assert rel(bk.ravel(), F.T @ tt.to_dense(b)) <= 1e-12
    Ak = tt.frame_project_op(A, x, k)
    assert rel(Ak.dense(), F.T @ tt.op_to_dense(A) @ F) <= 1e-12
    u = rng.standard_normal(Ak.shape[1])
    assert rel(Ak.matvec(u), Ak.dense() @ u) <= 1e-12


def test_frame_projection_identity_and_single_core(rng):
    x = tt.orthogonalize(tt.random_tt((3, 2, 3), 2, rng), 1)
    Ak = tt.frame_project_op(tt.identity(x.n), x, 1)
    assert np.abs(Ak.dense() - np.eye(Ak.shape[0])).max() <= 1e-12
    b = tt.TTVector([rng.standard_normal((1, 5, 1))])
    y = tt.TTVector([np.ones((1, 5, 1))])
    np.testing.assert_allclose(tt.frame_project_rhs(b, y, 0).ravel(), tt.to_dense(b))


def test_frame_reconstruction(rng):
    x = tt.orthogonalize(tt.random_tt((3, 4, 3), 2, rng), 1)
    bk = tt.frame_project_rhs(x, x, 1)
    F = tt.frame_matrix(x, 1)
    assert rel(F @ bk.ravel(), tt.to_dense(x)) <= 1e-12


def test_frame_requires_orthogonality(rng):
    x = tt.random_tt((3, 3, 3), 2, rng)
    with pytest.raises(AssertionError):
        tt.frame_project_rhs(x, x, 1)


def test_local_operator_conditioning(rng):
    dims = (3, 3, 3)
    M = rng.standard_normal((27, 27))
    M = M @ M.T + 27 * np.eye(27)
    A = tt.op_from_dense(M, dims)
    x = tt.orthogonalize(tt.random_tt(dims, 2, rng), 1)
    Ak = tt.frame_project_op(A, x, 1).dense()
    assert np.linalg.cond(Ak) <= np.linalg.cond(M) * (1 + 1e-8)


# -- QTT -----------------------------------------------------------------------------

def test_qtt_digit_layout():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    t = tt.qtt_tensor(a)
    np.testing.assert_array_equal(t, [[1, 3], [2, 4]])
    np.testing.assert_array_equal(tt.qtt_flatten(t), a)
    x = tt.qtt_fold(a)
    assert x.n == (2, 2)
    np.testing.assert_allclose(tt.to_dense(x), a, rtol=0, atol=1e-14)


def test_qtt_geometric_rank_one():
    q = 0.7
    x = tt.qtt_fold(q ** np.arange(64))
    assert x.max_rank == 1
    np.testing.assert_allclose(tt.to_dense(x), q ** np.arange(64), rtol=1e-13)


def test_qtt_fold_unfold_train(rng):
    x = tt.random_tt((8, 4, 16), 3, rng)
    f = tt.qtt_fold(x)
    assert f.n == (2,) * 9
    assert rel(tt.to_dense(f), tt.to_dense(x)) <= 1e-13
    u = tt.qtt_unfold(f, [3, 2, 4])
    assert u.n == (8, 4, 16)
    assert rel(tt.to_dense(u), tt.to_dense(x)) <= 1e-13


def test_qtt_bit_exact_round_trip(rng):
    a = rng.standard_normal(32)
    np.testing.assert_array_equal(tt.qtt_flatten(tt.qtt_tensor(a)), a)


def test_qtt_rejects_non_power_of_two():
    with pytest.raises(tt.TTShapeError):
        tt.qtt_fold(np.ones(6))
