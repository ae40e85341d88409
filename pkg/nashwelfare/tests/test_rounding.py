import math

import numpy
import pytest

import nashwelfare
import nashwelfare.exceptions
import nashwelfare.generators
import nashwelfare.matching
import nashwelfare.reference
import nashwelfare.relaxation
import nashwelfare.rounding

from nashwelfare.rounding import randomized_rounding, pad_with_dummies, find_large_set, UNASSIGNED
from nashwelfare.valuations import AdditiveOracle, CoverageOracle, Instance


MARGINAL_MATRIX = numpy.array([
    [0.5, 0.2, 0.0, 1.0],
    [0.3, 0.2, 0.7, 0.0],
    [0.1, 0.6, 0.0, 0.0],
])


def greedy_solution(instance):
    """
    Return (A', G', y) from the initial matching and the continuous greedy.
    """
    tau, H, opt_zero = nashwelfare.matching.initial_matching(instance)
    agents = nashwelfare.relaxation.active_agents(instance, H)
    items = nashwelfare.relaxation.remaining_items(instance, H)
    y, _ = nashwelfare.relaxation.iterated_continuous_greedy(
        instance, agents, items, nashwelfare.relaxation.GreedyConfig(), seed=0,
    )
    return agents, items, y


def test_rounding_marginals():
    """
    Test that Pr[Z_j = i] = y_ij within four standard deviations over 10^5 draws.
    """
    draws = 10 ** 5
    rng = nashwelfare.spawn_rng(0, nashwelfare.STREAM_ROUNDING)
    n, m = MARGINAL_MATRIX.shape
    counts = numpy.zeros((n + 1, m))
    for _ in range(draws):
        Z = randomized_rounding(MARGINAL_MATRIX, rng).Z
        counts[Z, numpy.arange(m)] += 1
    expected = numpy.vstack([MARGINAL_MATRIX, 1.0 - MARGINAL_MATRIX.sum(axis=0)])
    frequency = counts / draws
    tolerance = 4 * numpy.sqrt(expected * (1 - expected) / draws)
    assert (numpy.abs(frequency - expected) <= tolerance + 1e-12).all()


def test_rounding_vertices():
    """
    Test that integral rows round to themselves and an empty y leaves everything unassigned.
    """
    rng = numpy.random.default_rng(0)
    outcome = randomized_rounding([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], rng)
    assert outcome.Z.tolist() == [0, UNASSIGNED, 1]
    assert outcome.bundles == [[0], [2]]
    assert outcome.unassigned() == [1]
    assert outcome.unassigned([0, 2]) == []
    assert randomized_rounding(numpy.zeros((2, 3)), rng).Z.tolist() == [UNASSIGNED] * 3


def test_rounding_infeasible():
    """
    Test that a column sum above 1 is refused before drawing.
    """
    with pytest.raises(nashwelfare.exceptions.InfeasibleAllocationException):
        randomized_rounding([[0.7], [0.7]], numpy.random.default_rng(0))


def test_rounding_deterministic():
    """
    Test that one stream gives one outcome.
    """
    a = randomized_rounding(MARGINAL_MATRIX, nashwelfare.spawn_rng(3, nashwelfare.STREAM_ROUNDING, 1))
    b = randomized_rounding(MARGINAL_MATRIX, nashwelfare.spawn_rng(3, nashwelfare.STREAM_ROUNDING, 1))
    assert a.to_dict() == b.to_dict()


def test_pad_with_dummies():
    """
    Test that padding brings every agent to mass c without touching real items.
    """
    instance = Instance([AdditiveOracle([1.0, 2.0]), AdditiveOracle([3.0, 1.0])])
    y = numpy.array([[0.5, 0.0], [0.2, 0.3]])
    padded_instance, padded = pad_with_dummies(instance, y, 1.0)
    assert padded_instance.m == 4
    assert padded.y[:, :2].tolist() == y.tolist()
    assert numpy.allclose(padded.y[:, 2:], [[0.25, 0.25], [0.25, 0.25]])
    assert numpy.allclose(padded.y.sum(axis=1), [1.0, 1.0])
    assert padded_instance.oracles[0].value([2, 3]) == 0.0


def test_pad_with_dummies_selected_agents():
    """
    Test that only the given agents are padded.
    """
    instance = Instance([AdditiveOracle([1.0]), AdditiveOracle([1.0])])
    _, padded = pad_with_dummies(instance, [[0.0], [0.5]], 2.0, agents=[1])
    assert padded.y.shape == (2, 5)
    assert not padded.y[0].any()
    assert padded.y[1, 1:].sum() == pytest.approx(1.5)


def test_find_large_set_example():
    """
    Test that the items of largest marginal value are collected until mass c.
    """
    instance = Instance([AdditiveOracle([1.0, 4.0, 2.0, 3.0])])
    y_i = numpy.array([0.5, 0.5, 0.5, 0.5])
    assert find_large_set(instance, 0, y_i, 1.0) == [1, 3]
    assert find_large_set(instance, 0, y_i, 1.0, items=[0, 2]) == [0, 2]


def test_find_large_set_tie_break():
    """
    Test that ties go to the lowest item index.
    """
    instance = Instance([CoverageOracle([1.0], [[0], [0], [0]])])
    assert find_large_set(instance, 0, numpy.array([0.4, 0.4, 0.4]), 0.5) == [0, 1]


def test_find_large_set_requires_padding():
    """
    Test that an agent below mass c must be padded first.
    """
    instance = Instance([AdditiveOracle([1.0, 1.0])])
    with pytest.raises(nashwelfare.exceptions.PaddingRequiredException):
        find_large_set(instance, 0, numpy.array([0.3, 0.3]), 1.0)


@pytest.mark.parametrize('family', nashwelfare.reference.GOLDEN_FAMILIES)
def test_large_set_postconditions(family):
    """
    Test the mass window and the marginal bound on a padded greedy solution.
    """
    c = nashwelfare.rounding.DEFAULT_C
    instance = nashwelfare.generators.generate_instance(family, n=3, m=8, seed=1)
    agents, items, y = greedy_solution(instance)
    padded_instance, padded = pad_with_dummies(instance, y, c, agents)
    candidates = items + list(range(instance.m, padded_instance.m))
    for i in agents:
        large = find_large_set(padded_instance, i, padded.y[i], c, candidates)
        report = nashwelfare.rounding.large_set_report(padded_instance, i, padded.y[i], large, c, candidates)
        assert report['mass_ok'], report
        assert report['marginal_ok'], report


def test_restricted_rounding():
    """
    Test that the sparsified solution keeps y on the large set and 1 on the small items won.
    """
    instance = Instance([AdditiveOracle([4.0, 1.0, 1.0, 1.0]), AdditiveOracle([1.0, 1.0, 1.0, 4.0])])
    y = numpy.array([[0.6, 0.5, 0.3, 0.0], [0.4, 0.5, 0.7, 0.9]])
    rng = nashwelfare.spawn_rng(0, nashwelfare.STREAM_RESTRICTED, 0)
    sparse = nashwelfare.rounding.restricted_randomized_rounding(instance, y, 1.0, rng, [0, 1], [0, 1, 2, 3])
    assert sparse.large_sets[0] == [0, 1]
    assert sparse.large_sets[1] == [0, 3]
    for i in (0, 1):
        large = set(sparse.large_sets[i])
        assert not large & set(sparse.small_sets[i])
        for j in range(4):
            if j in large:
                assert sparse.y_sparse[i, j] == y[i, j]
            elif j in sparse.small_sets[i]:
                assert sparse.y_sparse[i, j] == 1.0
                assert sparse.outcome.Z[j] == i
            else:
                assert sparse.y_sparse[i, j] == 0.0


def test_small_items_bound():
    """
    Test the bound 3 (2 + 4/c).
    """
    assert nashwelfare.rounding.small_items_bound(1.0) == 18.0
    assert nashwelfare.rounding.small_items_bound(4.0) == 9.0


@pytest.mark.parametrize('family,seed', [('coverage', 0), ('budget_additive', 1), ('partition_matroid_rank', 2)])
def test_small_items_success_rate(family, seed):
    """
    Test that the small-items event holds with at least the guaranteed frequency over 500 roundings.
    """
    instance = nashwelfare.generators.generate_instance(family, n=3, m=7, seed=seed)
    exact = nashwelfare.reference.brute_force_nsw(instance)
    agents, items, y = greedy_solution(instance)
    result = nashwelfare.rounding.small_items_success_rate(instance, y, agents, items, exact.allocation,
                                                           1.0, 500)
    assert result['seeds'] == 500
    assert result['threshold'] == pytest.approx((3.0 / math.e - 1.0) / 4.0)
    assert result['frequency'] >= result['threshold']
