import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cisg.indexing import JointActionIndexing, lex_decode, lex_index


def test_two_by_three():
    idx = JointActionIndexing((0, 1), (2, 3))
    assert lex_index(idx, (1, 2)) == 5
    assert lex_decode(idx, 0) == (0, 0)
    assert idx.size == 6


def test_exhaustive_round_trip_two_by_three():
    idx = JointActionIndexing((0, 1), (2, 3))
    decoded = [lex_decode(idx, j) for j in range(6)]
    assert sorted(decoded) == list(itertools.product(range(2), range(3)))
    assert [lex_index(idx, a) for a in decoded] == list(range(6))


def test_order_sets_most_significant_agent():
    idx = JointActionIndexing((1, 0), (2, 3))
    # agent 1 is the high digit, agent 0 the low digit
    assert idx.index((1, 2)) == 2 * 2 + 1


def test_out_of_range_component():
    idx = JointActionIndexing((0, 1), (2, 3))
    with pytest.raises(ValueError):
        idx.index((2, 0))
    with pytest.raises(ValueError):
        idx.decode(6)


@st.composite
def indexings(draw):
    counts = draw(st.lists(st.integers(1, 5), min_size=2, max_size=4))
    order = draw(st.permutations(range(len(counts))))
    return JointActionIndexing(tuple(order), tuple(counts))


@given(indexings(), st.data())
def test_bijection(idx, data):
    j = data.draw(st.integers(0, idx.size - 1))
    assert idx.index(idx.decode(j)) == j
    joint = tuple(data.draw(st.integers(0, c - 1)) for c in idx.counts)
    assert idx.decode(idx.index(joint)) == joint
