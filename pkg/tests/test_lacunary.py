import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wijsman_lab.lacunary import LacunaryError, LacunarySchedule, parse_theta


def test_pow2_blocks():
    th = LacunarySchedule.pow2(62)
    assert th.horizon == 62
    assert th.h(1) == 2 and th.h(2) == 2 and th.h(10) == 2**9
    assert th.block(3) == (5, 8)
    assert th.k[-1] == 2**62
    np.testing.assert_array_equal(th.gaps[:4], [2, 2, 4, 8])


def test_complete_blocks_and_block_of():
    th = LacunarySchedule.pow2(10)
    assert th.complete_blocks(8) == (3, False)
    assert th.complete_blocks(9) == (3, True)
    assert th.complete_blocks(1) == (0, True)
    assert th.complete_blocks(2**10) == (10, False)
    assert th.block_of(1) == 1 and th.block_of(2) == 1 and th.block_of(3) == 2
    assert th.block_of(8) == 3 and th.block_of(9) == 4


def test_geometric():
    th = LacunarySchedule.geometric(1.5, 30)
    assert all(b > a for a, b in zip(th.k, th.k[1:]))
    assert th.check_growth()
    with pytest.raises(LacunaryError):
        LacunarySchedule.geometric(1.0, 5)


def test_validation():
    with pytest.raises(LacunaryError):
        LacunarySchedule((1, 2, 4))
    with pytest.raises(LacunaryError):
        LacunarySchedule((0, 4, 4))
    with pytest.raises(LacunaryError):
        LacunarySchedule((0,))
    with pytest.raises(LacunaryError):
        LacunarySchedule((0, 2**63))
    with pytest.raises(LacunaryError):
        LacunarySchedule.pow2(5).block(6)


def test_parse_theta():
    assert parse_theta("pow2").horizon == 62
    assert parse_theta("pow2:16").k[-1] == 2**16
    assert parse_theta("list:3,7,20").k == (0, 3, 7, 20)
    assert parse_theta("geom:2:10").k[-1] == 1024
    for bad in ("fib", "pow2:x", "list:5,3"):
        with pytest.raises(LacunaryError):
            parse_theta(bad)


def test_check_growth_rejects_flat_tail():
    assert not LacunarySchedule(tuple(range(0, 50, 5))).check_growth(bound=5)


@given(st.lists(st.integers(1, 10**6), min_size=1, max_size=30), st.data())
def test_block_of_inverts_block(gaps, data):
    k = np.concatenate([[0], np.cumsum(gaps)]).tolist()
    th = LacunarySchedule(tuple(k))
    r = data.draw(st.integers(1, th.horizon))
    lo, hi = th.block(r)
    assert th.block_of(lo) == r and th.block_of(hi) == r
    assert hi - lo + 1 == th.h(r)
    done, partial = th.complete_blocks(hi)
    assert done == r and not partial
