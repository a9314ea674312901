from hypothesis import given, strategies as st

from annotative.core import (BEGIN, END, MAX_ADDR, MIN_ADDR, NEG_INF, POS_INF,
                             InvariantError, check_mis, contains, is_finite, nests,
                             overlaps, reduce)

import pytest

intervals = st.tuples(st.integers(-20, 40), st.integers(0, 10)).map(lambda t: (t[0], t[0] + t[1]))


def test_contains_examples():
    assert contains((24, 26), (11, 27))
    assert contains((0, 0), (0, 0))
    assert not contains((10, 84), (11, 27))


def test_nests_examples():
    assert nests((24, 26), (11, 27))
    assert not nests((5, 9), (5, 9))
    assert not nests((0, 5), (4, 11))
    assert not nests((4, 11), (0, 5))
    assert overlaps((0, 5), (4, 11))


def test_reduce_examples():
    assert reduce({(0, 5), (4, 11), (0, 11)}) == [(0, 5), (4, 11)]
    assert reduce(set()) == []
    assert reduce({(3, 3)}) == [(3, 3)]
    assert reduce([(1, 2), (1, 2)]) == [(1, 2)]


def test_sentinels():
    assert NEG_INF < MIN_ADDR < 0 < MAX_ADDR < POS_INF
    assert BEGIN < (MIN_ADDR, MIN_ADDR) and END > (MAX_ADDR, MAX_ADDR)
    assert is_finite(0) and is_finite(-11)
    assert not is_finite(POS_INF) and not is_finite(NEG_INF)


@given(st.lists(intervals, max_size=64))
def test_reduce_is_idempotent(ivs):
    r = reduce(ivs)
    assert reduce(r) == r


@given(st.lists(intervals, max_size=64))
def test_reduce_keeps_exactly_the_non_nesting_members(ivs):
    s = set(ivs)
    expected = sorted(a for a in s if not any(nests(b, a) for b in s))
    assert reduce(ivs) == expected
    r = reduce(ivs)
    assert not any(nests(a, b) for a in r for b in r)
    check_mis(r)


@given(intervals, intervals)
def test_nesting_implies_containment(a, b):
    if nests(a, b):
        assert contains(a, b)
    if contains(a, b) and contains(b, a):
        assert a == b


def test_check_mis_rejects_nesting():
    with pytest.raises(InvariantError):
        check_mis([(0, 5), (1, 3)])
    with pytest.raises(InvariantError):
        check_mis([(3, 2)])
