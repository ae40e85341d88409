"""
Maximum-product bipartite matchings between agents and items.

The product objective is solved as an assignment problem on log-weights.
Edges of weight 0 are never used: the solver first maximizes the number of
agents matched at positive weight and then the sum of log-weights, and
among all optimal matchings returns the lexicographically smallest
assignment vector (agents in ascending order, items ascending, unmatched
last).
"""

import math
import logging

import numpy
import scipy.optimize

import nashwelfare
import nashwelfare.exceptions


TIE_TOLERANCE = 1e-9


class Matching(object):
    """
    An injective partial map from agents to items, stored as one item index
    (or None) per agent.
    """

    def __init__(self, assignment):
        self.assignment = [None if j is None else int(j) for j in assignment]
        matched = [j for j in self.assignment if j is not None]
        if len(matched) != len(set(matched)):
            raise nashwelfare.exceptions.InvalidAllocationException(
                'Matching assigns an item to two agents: %s' % self.assignment
            )

    @property
    def n(self):
        return len(self.assignment)

    @property
    def size(self):
        return len(self.items())

    def __getitem__(self, agent):
        return self.assignment[agent]

    def items(self):
        return sorted(j for j in self.assignment if j is not None)

    def matched_agents(self):
        return [i for i, j in enumerate(self.assignment) if j is not None]

    def unmatched_agents(self):
        return [i for i, j in enumerate(self.assignment) if j is None]

    def log_product(self, weights):
        """
        Return the sum of log weights[i, j] over matched pairs.
        """
        return math.fsum(nashwelfare.safe_log(weights[i][j]) for i, j in enumerate(self.assignment) if j is not None)

    def check_pool(self, pool):
        pool = set(pool)
        for i, j in enumerate(self.assignment):
            if j is not None and j not in pool:
                raise nashwelfare.exceptions.InvalidAllocationException(
                    'Agent %d is matched to item %d outside the pool' % (i, j)
                )

    def to_list(self):
        return list(self.assignment)

    def __eq__(self, other):
        return isinstance(other, Matching) and self.assignment == other.assignment

    def __repr__(self):
        return '<Matching %s>' % self.assignment


def _solve(gain, fixed):
    """
    Solve the assignment problem for 'gain' with some agents' choices fixed.
    Every agent has a private zero-gain column meaning "unmatched". Return the
    assignment as a list of item indices or None.
    """
    n, k = gain.shape
    cost = numpy.full((n, k + n), numpy.inf)
    cost[:, :k] = numpy.where(numpy.isfinite(gain), -gain, numpy.inf)
    cost[numpy.arange(n), k + numpy.arange(n)] = 0.0
    for agent, choice in fixed.items():
        if choice is None:
            cost[agent, :k] = numpy.inf
        else:
            keep = cost[agent, choice]
            cost[agent, :] = numpy.inf
            cost[:, choice] = numpy.inf
            cost[agent, choice] = keep
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    assignment = [None] * n
    for i, j in zip(rows, cols):
        if j < k:
            assignment[i] = int(j)
    return assignment


def _score(log_weights, assignment):
    matched = [(i, j) for i, j in enumerate(assignment) if j is not None]
    return len(matched), math.fsum(log_weights[i, j] for i, j in matched)


def _at_least(score, best):
    count, log_sum = score
    best_count, best_log_sum = best
    if count != best_count:
        return count > best_count
    return log_sum >= best_log_sum - TIE_TOLERANCE * max(1.0, abs(best_log_sum))


def max_product_matching(weights):
    """
    Return the Matching maximizing the product of the weights of its edges,
    as described in the module documentation.
    """
    weights = numpy.asarray(weights, dtype=float)
    if weights.ndim != 2:
        raise nashwelfare.exceptions.InvalidInstanceException('Matching weights must be a matrix')
    n, k = weights.shape
    if n == 0 or k == 0:
        return Matching([None] * n)
    if (weights < 0).any() or not numpy.isfinite(weights).all():
        raise nashwelfare.exceptions.InvalidInstanceException('Matching weights must be finite and non-negative')

    positive = weights > 0
    if not positive.any():
        return Matching([None] * n)

    with numpy.errstate(divide='ignore'):
        log_weights = numpy.log(weights)
    low = log_weights[positive].min()
    span = log_weights[positive].max() - low
    # Each positive edge is worth more than any log-sum difference, so the
    # number of matched agents is maximized first.
    bonus = min(n, k) * (span + 1.0) + 1.0
    gain = numpy.where(positive, bonus + (log_weights - low + 1.0), -numpy.inf)

    fixed = {}
    current = _solve(gain, fixed)
    best = _score(log_weights, current)
    for agent in range(n):
        choice = current[agent]
        limit = k if choice is None else choice
        for j in range(limit):
            if not positive[agent, j] or j in fixed.values():
                continue
            trial = dict(fixed)
            trial[agent] = j
            candidate = _solve(gain, trial)
            if _at_least(_score(log_weights, candidate), best):
                current = candidate
                break
        fixed[agent] = current[agent]
    return Matching(current)


def complete_matching(matching, pool):
    """
    Hand the items of 'pool' left over by 'matching' to its unmatched agents,
    lowest agent first and lowest item first.
    """
    assignment = matching.to_list()
    leftovers = sorted(set(pool) - set(matching.items()))
    for agent in matching.unmatched_agents():
        if not leftovers:
            break
        assignment[agent] = leftovers.pop(0)
    return Matching(assignment)


def initial_matching(instance):
    """
    Match agents to single items maximizing the product of singleton values.
    Return the matching tau, the matched item set H and the opt_zero flag,
    which is set when fewer than n agents can be matched at positive value.
    """
    weights = instance.singleton_values()
    tau = max_product_matching(weights)
    H = tau.items()
    opt_zero = tau.size < instance.n
    if opt_zero:
        logging.warning('Only %d of %d agents can be matched at positive value; the optimum is 0' % (tau.size, instance.n))
    else:
        logging.info('Initial matching found with log product %.6f' % tau.log_product(weights))
    return tau, H, opt_zero


def final_matching(instance, bundles, H):
    """
    Match agents to the items of H maximizing the product of v_i(R_i + h).
    H items left over go to the remaining unmatched agents.
    """
    H = sorted(H)
    n = instance.n
    weights = numpy.zeros((n, len(H)), dtype=float)
    for i, oracle in enumerate(instance.oracles):
        if not H:
            break
        base = oracle.membership(bundles[i])
        member = numpy.repeat(base[None, :], len(H), axis=0)
        member[numpy.arange(len(H)), H] = True
        weights[i] = oracle.values(member)
    columns = max_product_matching(weights)
    sigma = Matching([None if c is None else H[c] for c in columns.assignment])
    return complete_matching(sigma, H)
