import numpy as np
import pytest

from tamen import tt, ttio
from conftest import random_operator


@pytest.mark.parametrize("dtype", [float, complex])
def test_vector_round_trip_bit_exact(tmp_path, rng, dtype):
    x = tt.random_tt([2, 3, 4], 2, rng, dtype)
    path = tmp_path / "x.ttv"
    ttio.save_vector(path, x)
    y = ttio.load_vector(path)
    assert y.n == x.n and y.ranks == x.ranks
    for a, b in zip(x.cores, y.cores):
        assert a.dtype == b.dtype
        np.testing.assert_array_equal(a, b)


def test_operator_round_trip(tmp_path, rng):
    A = random_operator([2, 3], 2, rng)
    path = tmp_path / "a.tto"
    ttio.save_operator(path, A)
    B = ttio.load_operator(path)
    for a, b in zip(A.cores, B.cores):
        np.testing.assert_array_equal(a, b)


def test_layout_leading_rank_fastest():
    core = np.arange(6, dtype=float).reshape(1, 3, 2)
    x = tt.TTVector([core, np.ones((2, 1, 1))])
    buf = ttio.dumps_vector(x)
    assert buf[:4] == b"TTV1"
    # header: magic, d, kind, 2 modes, 3 ranks
    payload = np.frombuffer(buf[4 + 4 * 7:4 + 4 * 7 + 48], dtype="<f8")
    np.testing.assert_array_equal(payload, core.ravel(order="F"))


def test_bad_magic_and_truncation(rng):
    buf = ttio.dumps_vector(tt.random_tt([2, 2], 2, rng))
    with pytest.raises(ttio.TTFormatError, match="magic"):
        ttio.loads_vector(b"XXXX" + buf[4:])
    with pytest.raises(ttio.TTFormatError, match="truncated"):
        ttio.loads_vector(buf[:-5])
    with pytest.raises(ttio.TTFormatError):
        ttio.loads_vector(buf + b"\0")
    with pytest.raises(ttio.TTFormatError, match="magic"):
        ttio.loads_operator(buf)
