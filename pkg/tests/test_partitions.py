import pytest
from hypothesis import given, strategies as st

from freeito.errors import SizeError, ValidationError
from freeito.partitions import (
    MAX_ENUMERATION,
    SetPartition,
    block_profile,
    catalan,
    enumerate_noncrossing,
    is_noncrossing,
    iter_noncrossing,
)

import oracles


def test_crossing_examples():
    assert not is_noncrossing(SetPartition(4, [[1, 3], [2, 4]]))
    assert is_noncrossing(SetPartition(4, [[1, 4], [2, 3]]))
    assert is_noncrossing(SetPartition(3, [[1], [2], [3]]))


def test_small_enumerations():
    assert [p.blocks for p in enumerate_noncrossing(1)] == [((1,),)]
    assert len(enumerate_noncrossing(3)) == 5
    four = enumerate_noncrossing(4)
    assert len(four) == 14
    assert SetPartition(4, [[1, 3], [2, 4]]) not in four


def test_block_profile():
    assert sorted(block_profile(SetPartition(4, [[1, 4], [2, 3]]))) == [2, 2]
    assert block_profile(SetPartition(3, [[1, 2, 3]])) == (3,)
    assert sorted(block_profile(SetPartition(4, [[1], [2, 4], [3]]))) == [1, 1, 2]


@pytest.mark.parametrize("n", range(1, 9))
def test_matches_bruteforce_filter(n):
    expected = {tuple(tuple(b) for b in p) for p in oracles.noncrossing_bruteforce(n)}
    got = {p.blocks for p in enumerate_noncrossing(n)}
    assert got == expected


@pytest.mark.parametrize("n", range(1, 13))
def test_catalan_counts(n):
    assert len(enumerate_noncrossing(n)) == catalan(n) == oracles.catalan(n)


def test_canonical_order_is_lexicographic_rgs():
    rgs = [p.rgs for p in enumerate_noncrossing(6)]
    assert rgs == sorted(rgs)
    assert len(set(rgs)) == len(rgs)


def test_emitted_partitions_are_valid():
    for p in iter_noncrossing(7):
        assert is_noncrossing(p)
        assert sum(block_profile(p)) == 7


def test_rgs_roundtrip():
    for p in enumerate_noncrossing(5):
        assert SetPartition.from_rgs(p.rgs) == p


@given(st.lists(st.integers(0, 3), min_size=1, max_size=8))
def test_is_noncrossing_agrees_with_oracle(labels):
    p = SetPartition.from_rgs(labels)
    assert is_noncrossing(p) == (not oracles.crosses([list(b) for b in p.blocks]))


def test_invalid_inputs():
    with pytest.raises(ValidationError):
        SetPartition(3, [[1, 2], [2, 3]])
    with pytest.raises(ValidationError):
        SetPartition(3, [[1, 2]])
    with pytest.raises(SizeError):
        enumerate_noncrossing(0)
    with pytest.raises(SizeError):
        enumerate_noncrossing(MAX_ENUMERATION + 1)
