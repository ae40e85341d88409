import math
import itertools

import numpy
import pytest

from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import nashwelfare.exceptions
import nashwelfare.generators
import nashwelfare.matching
import nashwelfare.valuations

from nashwelfare.matching import Matching, max_product_matching
from nashwelfare.valuations import AdditiveOracle, CoverageOracle, Instance


def exhaustive_matching(weights):
    """
    Enumerate every matching on positive edges and return the best score and
    the lexicographically smallest assignment reaching it, None sorting last.
    """
    weights = numpy.asarray(weights, dtype=float)
    n, k = weights.shape
    choices = list(range(k)) + [None]
    best = None
    found = []
    for assignment in itertools.product(choices, repeat=n):
        used = [j for j in assignment if j is not None]
        if len(used) != len(set(used)):
            continue
        if any(j is not None and weights[i, j] <= 0 for i, j in enumerate(assignment)):
            continue
        score = (len(used), math.fsum(math.log(weights[i, j]) for i, j in enumerate(assignment) if j is not None))
        found.append((score, list(assignment)))
        if best is None or score[0] > best[0] or (score[0] == best[0] and score[1] > best[1]):
            best = score
    tolerance = 1e-9 * max(1.0, abs(best[1]))
    winners = [a for s, a in found if s[0] == best[0] and s[1] >= best[1] - tolerance]
    return best, min(winners, key=lambda a: [k if j is None else j for j in a])


def test_matching_examples():
    """
    Test the examples: forced diagonal, symmetric tie and the crossing product.
    """
    assert max_product_matching([[2, 0], [0, 3]]).to_list() == [0, 1]
    assert max_product_matching([[1, 1], [1, 1]]).to_list() == [0, 1]
    matching = max_product_matching([[5, 4], [5, 1]])
    assert matching.to_list() == [1, 0]
    assert matching.log_product([[5, 4], [5, 1]]) == pytest.approx(math.log(20))


def test_matching_zero_edges_unused():
    """
    Test that agents matchable only at weight 0 stay unmatched.
    """
    matching = max_product_matching([[0, 0], [3, 0]])
    assert matching.to_list() == [None, 0]
    assert max_product_matching(numpy.zeros((2, 3))).to_list() == [None, None]
    assert max_product_matching(numpy.zeros((2, 0))).to_list() == [None, None]


def test_matching_rejects_bad_weights():
    """
    Test that negative and infinite weights are refused.
    """
    with pytest.raises(nashwelfare.exceptions.InvalidInstanceException):
        max_product_matching([[1.0, -1.0]])
    with pytest.raises(nashwelfare.exceptions.InvalidInstanceException):
        max_product_matching([[1.0, numpy.inf]])


def test_matching_injective():
    """
    Test that a Matching refuses to give an item twice.
    """
    with pytest.raises(nashwelfare.exceptions.InvalidAllocationException):
        Matching([1, 1])
    matching = Matching([2, None, 0])
    assert matching.items() == [0, 2]
    assert matching.unmatched_agents() == [1]
    with pytest.raises(nashwelfare.exceptions.InvalidAllocationException):
        matching.check_pool([0, 1])


@settings(max_examples=150, deadline=None)
@given(hnp.arrays(numpy.int64, st.tuples(st.integers(1, 4), st.integers(1, 5)), elements=st.integers(0, 4)))
def test_matching_against_exhaustive(weights):
    """
    Test optimality and the tie-break rule against exhaustive enumeration.
    """
    weights = weights.astype(float)
    if not (weights > 0).any():
        assert max_product_matching(weights).size == 0
        return
    best, smallest = exhaustive_matching(weights)
    matching = max_product_matching(weights)
    assert matching.size == best[0]
    assert matching.log_product(weights) == pytest.approx(best[1], abs=1e-9)
    assert matching.to_list() == smallest


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(numpy.float64, st.tuples(st.integers(1, 4), st.integers(4, 6)),
                  elements=st.floats(0.5, 20.0)),
       st.lists(st.sampled_from([1e-6, 1.0, 1e6]), min_size=4, max_size=4))
def test_matching_scale_invariance(weights, factors):
    """
    Test that scaling rows by positive factors keeps the assignment.
    """
    scaled = weights * numpy.array(factors[:weights.shape[0]])[:, None]
    assert max_product_matching(scaled) == max_product_matching(weights)


def test_initial_matching_example():
    """
    Test the initial matching of additive agents (2, 0) and (0, 3).
    """
    instance = Instance([AdditiveOracle([2.0, 0.0]), AdditiveOracle([0.0, 3.0])])
    tau, H, opt_zero = nashwelfare.matching.initial_matching(instance)
    assert tau.to_list() == [0, 1]
    assert H == [0, 1]
    assert not opt_zero


def test_initial_matching_too_few_items():
    """
    Test that fewer items than agents means the optimum is 0.
    """
    instance = Instance([AdditiveOracle([1.0]), AdditiveOracle([2.0])])
    tau, H, opt_zero = nashwelfare.matching.initial_matching(instance)
    assert opt_zero
    assert tau.size == 1


def test_initial_matching_tightness():
    """
    Test that the tightness instance matches all three agents at value 1.
    """
    instance = nashwelfare.generators.generate_instance('tightness', n=3, m=6, seed=0)
    tau, H, opt_zero = nashwelfare.matching.initial_matching(instance)
    assert not opt_zero
    assert tau.to_list() == [0, 1, 2]
    assert H == [0, 1, 2]


def test_final_matching_empty_bundles():
    """
    Test that empty bundles reduce the final matching to the initial one on H.
    """
    instance = nashwelfare.generators.generate_instance('additive', n=3, m=6, seed=1)
    tau, H, opt_zero = nashwelfare.matching.initial_matching(instance)
    sigma = nashwelfare.matching.final_matching(instance, [[], [], []], H)
    assert sigma == tau


def test_final_matching_single_agent():
    """
    Test that a single agent takes the H item on top of its bundle.
    """
    instance = Instance([AdditiveOracle([1.0, 2.0])])
    sigma = nashwelfare.matching.final_matching(instance, [[1]], [0])
    assert sigma.to_list() == [0]


def test_final_matching_contested_item():
    """
    Test that a contested item goes to the agent with the larger product gain.
    """
    # Agent 0 holds value 10 already, so item 0 adds a factor 1.1; agent 1
    # has nothing, so item 0 is worth a factor 5 / 1 over item 1.
    instance = Instance([
        AdditiveOracle([1.0, 1.0, 10.0]),
        AdditiveOracle([5.0, 1.0, 0.0]),
    ])
    sigma = nashwelfare.matching.final_matching(instance, [[2], []], [0, 1])
    assert sigma.to_list() == [1, 0]


def test_final_matching_zero_gain_items():
    """
    Test that H items of zero combined value still complete a perfect matching.
    """
    instance = Instance([
        CoverageOracle([1.0], [[0], [], []]),
        CoverageOracle([1.0], [[0], [], []]),
    ])
    sigma = nashwelfare.matching.final_matching(instance, [[0], []], [1, 2])
    assert sorted(sigma.items()) == [1, 2]
    assert sigma.unmatched_agents() == []


def test_complete_matching():
    """
    Test that leftovers go to unmatched agents, lowest first.
    """
    completed = nashwelfare.matching.complete_matching(Matching([None, 3, None]), [1, 3, 5])
    assert completed.to_list() == [1, 3, 5]
