import math

import numpy
import pytest
import scipy.optimize

import nashwelfare.exceptions
import nashwelfare.generators
import nashwelfare.matching
import nashwelfare.reference
import nashwelfare.relaxation

from nashwelfare.relaxation import GreedyConfig, greedy_direction, continuous_greedy_pass, iterated_continuous_greedy
from nashwelfare.valuations import AdditiveOracle, Instance


def two_agent_example():
    """
    Items 0 and 1 form H; agent 0 alone values item 2 and agent 1 alone values item 3.
    """
    return Instance([AdditiveOracle([5.0, 0.0, 1.0, 0.0]), AdditiveOracle([0.0, 5.0, 0.0, 1.0])])


def relaxation_input(instance):
    tau, H, opt_zero = nashwelfare.matching.initial_matching(instance)
    agents = nashwelfare.relaxation.active_agents(instance, H)
    items = nashwelfare.relaxation.remaining_items(instance, H)
    return H, agents, items


def test_active_agents_tightness():
    """
    Test that agents valuing only H are left out of A'.
    """
    instance = nashwelfare.reference.tightness_instance(3)
    assert nashwelfare.relaxation.active_agents(instance, [0, 1, 2]) == [1, 2]
    assert nashwelfare.relaxation.remaining_items(instance, [0, 1, 2]) == [3, 4, 5]


def test_greedy_direction_examples():
    """
    Test that each item goes to the agent with the largest weight per unit of value.
    """
    assert greedy_direction([[2, 1], [1, 3]], [1, 1]).tolist() == [[1, 0], [0, 1]]
    assert greedy_direction([[2, 1], [1, 3]], [4, 1]).tolist() == [[0, 0], [1, 1]]
    assert greedy_direction([[1], [1]], [1, 1]).tolist() == [[1], [0]]
    assert greedy_direction([[0, 1], [0, 0]], [1, 1]).tolist() == [[0, 1], [0, 0]]


def test_greedy_direction_collapse():
    """
    Test that a non-positive value is reported rather than divided by.
    """
    with pytest.raises(nashwelfare.exceptions.EstimatorCollapseException):
        greedy_direction([[1, 1], [1, 1]], [1.0, 0.0])


def test_greedy_direction_is_optimal():
    """
    Test the direction against the linear program it solves.
    """
    rng = numpy.random.default_rng(17)
    for _ in range(20):
        n, k = rng.integers(1, 5), rng.integers(1, 7)
        weights = rng.random((n, k)) * (rng.random((n, k)) < 0.7)
        values = rng.random(n) + 0.1
        ratios = weights / values[:, None]
        columns = numpy.zeros((k, n * k))
        for j in range(k):
            columns[j, j::k] = 1.0
        result = scipy.optimize.linprog(-ratios.ravel(), A_ub=columns, b_ub=numpy.ones(k), bounds=(0, None))
        z = greedy_direction(weights, values)
        assert (z.sum(axis=0) <= 1).all()
        assert (ratios * z).sum() == pytest.approx(-result.fun, abs=1e-9)


def test_pass_from_zero():
    """
    Test that a pass from y = 0 puts mass 1/2 on the single valued item.
    """
    instance = Instance([AdditiveOracle([2.0, 1.0])])
    y = continuous_greedy_pass(instance, [0], [1], numpy.zeros((1, 2)), GreedyConfig(), seed=0)
    assert y.y.tolist() == [[0.0, 0.5]]


def test_pass_without_positive_weights():
    """
    Test that items of zero weight leave the pass at y_start / 2.
    """
    instance = Instance([AdditiveOracle([1.0, 0.0])])
    y = continuous_greedy_pass(instance, [0], [1], numpy.array([[0.8, 0.4]]), GreedyConfig(), seed=0)
    assert numpy.allclose(y.y, [[0.4, 0.2]])


def test_pass_collapse_threshold():
    """
    Test that an agent entering a pass with value below min v_i({j}) / (mn)^2
    is a collapse, while an agent entering with nothing is held to delta times that.
    """
    instance = Instance([AdditiveOracle([1.0, 1.0, 1.0]), AdditiveOracle([1.0, 1.0, 1.0])])
    config = GreedyConfig(delta=1.0 / 12)
    thresholds = nashwelfare.relaxation._collapse_thresholds(instance, [0, 1], [0, 1, 2], 1.0 / 12,
                                                             numpy.array([False, True]))
    assert thresholds[0] == pytest.approx(1.0 / 36)
    assert thresholds[1] == pytest.approx(1.0 / 432)
    y_start = numpy.array([[0.02, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(nashwelfare.exceptions.EstimatorCollapseException):
        continuous_greedy_pass(instance, [0, 1], [0, 1, 2], y_start, config, seed=0)
    y = continuous_greedy_pass(instance, [0, 1], [0, 1, 2], numpy.zeros((2, 3)), config, seed=0)
    assert (y.y.sum(axis=1) > 0).all()


def test_pass_increases_objective():
    """
    Test that a pass never ends below the halved starting point.
    """
    instance = nashwelfare.generators.generate_instance('coverage', n=3, m=7, seed=4)
    H, agents, items = relaxation_input(instance)
    start = numpy.zeros((3, 7))
    start[numpy.ix_(agents, items)] = 1.0 / 3
    trace = nashwelfare.relaxation.GreedyTrace(agents, items)
    end = continuous_greedy_pass(instance, agents, items, start, GreedyConfig(), seed=0, trace=trace)
    objective = nashwelfare.relaxation.objective
    assert objective(instance, agents, end) >= objective(instance, agents, start / 2) - 1e-12
    assert len(trace.directions) == 1
    assert len(trace.directions[0]) == GreedyConfig.steps(1.0 / 28)


def test_iterated_greedy_without_agents():
    """
    Test that an empty A' leaves the fractional solution at 0.
    """
    instance = nashwelfare.reference.tightness_instance(3)
    y, trace = iterated_continuous_greedy(instance, [], [3, 4, 5], GreedyConfig(), seed=0)
    assert not y.y.any()
    assert trace.count == 0


def test_iterated_greedy_single_agent():
    """
    Test that a single agent ends holding all of G' after one pass.
    """
    instance = Instance([AdditiveOracle([3.0, 1.0, 2.0])])
    H, agents, items = relaxation_input(instance)
    assert H == [0]
    y, trace = iterated_continuous_greedy(instance, agents, items, GreedyConfig(), seed=0)
    assert numpy.allclose(y.y, [[0.0, 1.0, 1.0]])
    assert trace.count == 1
    certificate = nashwelfare.relaxation.greedy_certificate(instance, agents, items, y, [[0, 1, 2]])
    assert certificate == pytest.approx(1.0)


def test_iterated_greedy_two_agents():
    """
    Test the passes on two agents with disjoint interests.
    """
    instance = two_agent_example()
    H, agents, items = relaxation_input(instance)
    assert (H, agents, items) == ([0, 1], [0, 1], [2, 3])
    y, trace = iterated_continuous_greedy(instance, agents, items, GreedyConfig(), seed=0)
    # Each pass halves, then the owner gets 1/2 more: 1/2 -> 3/4 -> 7/8 -> 15/16.
    assert trace.count == 3
    assert y.y[0, 2] == pytest.approx(0.9375)
    assert y.y[1, 2] == pytest.approx(0.0625)
    assert y.y[1, 3] == pytest.approx(0.9375)
    assert trace.iterations[0]['gain'] == pytest.approx(math.log(1.5))
    assert trace.count <= math.ceil(8 * math.log(2)) + 2


def test_iteration_limit():
    """
    Test that a greedy still gaining at the cap raises with its trace attached.
    """
    instance = two_agent_example()
    H, agents, items = relaxation_input(instance)
    with pytest.raises(nashwelfare.exceptions.IterationLimitException) as e:
        iterated_continuous_greedy(instance, agents, items, GreedyConfig(max_iterations=1, gain_threshold=1e-12),
                                   seed=0)
    assert e.value.trace.count == 1
    assert e.value.exit_code == nashwelfare.exceptions.EXIT_INVARIANT


@pytest.mark.parametrize('family', nashwelfare.reference.GOLDEN_FAMILIES)
def test_greedy_certificate_against_optimum(family):
    """
    Test the e bound and the iteration bound against the brute-forced optimum.
    """
    instance = nashwelfare.generators.generate_instance(family, n=3, m=7, seed=6)
    H, agents, items = relaxation_input(instance)
    exact = nashwelfare.reference.brute_force_nsw(instance)
    if exact.log_nsw == -math.inf:
        pytest.skip('optimum is 0')
    y, trace = iterated_continuous_greedy(instance, agents, items, GreedyConfig(), seed=0)
    assert (y.column_sums() <= 1 + 1e-9).all()
    assert trace.count <= math.ceil(8 * math.log(3)) + 2
    certificate = nashwelfare.relaxation.greedy_certificate(instance, agents, items, y, exact.allocation)
    assert certificate <= math.e + 1e-6


def test_greedy_config_validation():
    """
    Test that malformed greedy parameters are refused.
    """
    for kwargs in ({'delta': 0.0}, {'delta': 0.3}, {'delta': 0.75}, {'samples': 0},
                   {'gain_threshold': 0.0}, {'max_iterations': 0}, {'estimator': 'guess'}):
        with pytest.raises(nashwelfare.exceptions.InvalidInstanceException):
            GreedyConfig(**kwargs)


def test_greedy_config_resolve():
    """
    Test the defaults derived from the instance size.
    """
    delta, steps, samples = GreedyConfig().resolve(2, 4)
    assert delta == 1.0 / 16
    assert steps == 8
    assert samples == int(math.ceil(50 * 6 * math.log(9)))
    assert GreedyConfig(delta=0.125, samples=10).resolve(2, 4) == (0.125, 4, 10)


def test_sampled_greedy_deterministic():
    """
    Test that a sampled run is feasible and reproduced by its seed.
    """
    instance = nashwelfare.generators.generate_instance('coverage', n=3, m=8, seed=2)
    H, agents, items = relaxation_input(instance)
    config = GreedyConfig(estimator='sample', samples=300)
    first, trace = iterated_continuous_greedy(instance, agents, items, config, seed=5)
    second, _ = iterated_continuous_greedy(instance, agents, items, config, seed=5)
    assert (first.y == second.y).all()
    assert (first.column_sums() <= 1 + 1e-9).all()
    assert trace.sampled_agents == agents


def test_sampled_objective():
    """
    Test that the sampled objective agrees with the exact one.
    """
    instance = nashwelfare.generators.generate_instance('coverage', n=2, m=5, seed=3)
    y = numpy.full((2, 5), 0.5)
    exact = nashwelfare.relaxation.objective(instance, [0, 1], y)
    estimate, error = nashwelfare.relaxation.sampled_objective(instance, [0, 1], y, 20000, 0)
    assert abs(estimate - exact) <= 4 * error + 1e-12


def test_trace_to_dict():
    """
    Test that the trace document encodes logs and counts passes.
    """
    instance = two_agent_example()
    H, agents, items = relaxation_input(instance)
    _, trace = iterated_continuous_greedy(instance, agents, items, GreedyConfig(), seed=0)
    data = trace.to_dict()
    assert data['count'] == 3
    assert data['items'] == [2, 3]
    assert data['initial_objective'] == pytest.approx(math.log(0.5))
    assert data['directions'][0][0] == [0, 1]
