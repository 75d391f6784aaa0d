import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randattn import RandomSource

u64 = st.integers(0, 2**64 - 1)


@given(u64, u64)
def test_same_token_same_sequence(seed, stream):
    a = RandomSource(seed, stream).generator().random(8)
    b = RandomSource(seed, stream).generator().random(8)
    assert np.array_equal(a, b)


def test_tokens_are_immutable_and_advance_functionally():
    r = RandomSource(5)
    x, nxt = r.normal(4)
    assert r.counter == 0 and nxt.counter == 1
    assert np.array_equal(x, r.normal(4)[0])
    assert not np.array_equal(x, nxt.normal(4)[0])
    u, _ = r.uniform(3)
    assert np.all((0 <= u) & (u < 1))


def test_distinct_streams_are_uncorrelated():
    a = RandomSource(1, 0).generator().standard_normal(200_000)
    b = RandomSource(1, 1).generator().standard_normal(200_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(200_000)


def test_substreams_do_not_collide():
    root = RandomSource(0)
    ids = {root.substream(i).stream for i in range(10_000)}
    ids |= {root.substream(1).substream(i).stream for i in range(10_000)}
    assert len(ids) == 20_000


@pytest.mark.parametrize("bad", [-1, 2**64, 1.5])
def test_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        RandomSource(bad)
