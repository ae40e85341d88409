"""
Independent randomized rounding of a fractional allocation, and the large
item search and restricted rounding used to check the small-items bound.
"""

import math
import logging

import numpy

import nashwelfare
import nashwelfare.exceptions
import nashwelfare.multilinear


UNASSIGNED = -1
DEFAULT_C = 1.0


def _matrix(y):
    if isinstance(y, nashwelfare.multilinear.FractionalAllocation):
        return y.y
    return numpy.asarray(y, dtype=float)


class RoundingOutcome(object):
    """
    One draw of the rounding: Z[j] is the agent receiving item j, or -1.
    """

    def __init__(self, Z, n):
        self.Z = numpy.asarray(Z, dtype=numpy.int64)
        self.n = int(n)

    @property
    def bundles(self):
        return [[int(j) for j in numpy.flatnonzero(self.Z == i)] for i in range(self.n)]

    def unassigned(self, items=None):
        missing = [int(j) for j in numpy.flatnonzero(self.Z == UNASSIGNED)]
        if items is None:
            return missing
        items = set(items)
        return [j for j in missing if j in items]

    def to_dict(self):
        return {'Z': [int(z) for z in self.Z], 'R': self.bundles}


def randomized_rounding(y, rng):
    """
    Give every item j independently to agent i with probability y_ij, and to
    nobody with probability 1 - sum_i y_ij.
    """
    if isinstance(y, nashwelfare.multilinear.FractionalAllocation):
        y.validate()
    else:
        nashwelfare.multilinear.FractionalAllocation(y)
    y = _matrix(y)
    n, m = y.shape
    u = rng.random(m)
    bounds = numpy.cumsum(y, axis=0)
    Z = (u[None, :] >= bounds).sum(axis=0)
    Z = numpy.where(Z >= n, UNASSIGNED, Z)
    return RoundingOutcome(Z, n)


def pad_with_dummies(instance, y, c, agents=None):
    """
    Append ceil(c) * n zero-valued items and spread each agent's shortfall
    below mass c uniformly over them. Return the padded instance and
    allocation; original coordinates are unchanged.
    """
    y = _matrix(y)
    n, m = y.shape
    agents = range(n) if agents is None else agents
    extra = int(math.ceil(c)) * n
    padded = numpy.zeros((n, m + extra), dtype=float)
    padded[:, :m] = y
    for i in agents:
        deficit = c - y[i].sum()
        if deficit > 0:
            padded[i, m:] = deficit / extra
    return instance.padded(extra), nashwelfare.multilinear.FractionalAllocation(padded)


def _overlay_gains(oracle, base, candidates):
    """
    Return V(base + 1_j) - V(base) for every candidate item j.
    """
    current = nashwelfare.multilinear.eval_exact(oracle, base)
    if oracle.closed_form:
        points = numpy.repeat(base[None, :], len(candidates), axis=0)
        points[numpy.arange(len(candidates)), candidates] = 1.0
        return oracle.extension(points) - current, current
    gains = [nashwelfare.multilinear.eval_exact(oracle, nashwelfare.multilinear.overlay(base, [j])) - current
             for j in candidates]
    return numpy.array(gains, dtype=float), current


def find_large_set(instance, i, y_i, c, items=None):
    """
    Greedily collect the items of largest marginal value for V_i on the
    restricted vector y_i^(L), lowest index first on ties, until their mass
    in y_i reaches c.
    """
    y_i = numpy.asarray(y_i, dtype=float)
    items = list(range(len(y_i))) if items is None else sorted(items)
    total = float(y_i[items].sum()) if items else 0.0
    if total < c - nashwelfare.multilinear.FEASIBILITY_TOLERANCE:
        raise nashwelfare.exceptions.PaddingRequiredException(
            'Agent %d has mass %.6g below c = %g; pad the solution with dummy items first' % (i, total, c)
        )
    oracle = instance.oracles[i]
    large = []
    mass = 0.0
    remaining = list(items)
    while remaining and mass < c - nashwelfare.multilinear.FEASIBILITY_TOLERANCE:
        base = nashwelfare.multilinear.restrict(y_i, large)
        gains, _ = _overlay_gains(oracle, base, numpy.asarray(remaining))
        best = gains.max()
        pick = int(numpy.flatnonzero(gains >= best - 1e-12 * abs(best))[0])
        j = remaining.pop(pick)
        large.append(j)
        mass += y_i[j]
    return sorted(large)


def large_set_report(instance, i, y_i, large, c, items):
    """
    Return the mass of the large set and the largest marginal V(y^(L) + 1_j) -
    V(y^(L)) over items outside it, next to the bound V(y^(L)) / c.
    """
    y_i = numpy.asarray(y_i, dtype=float)
    oracle = instance.oracles[i]
    base = nashwelfare.multilinear.restrict(y_i, large)
    outside = [j for j in items if j not in set(large)]
    if outside:
        gains, current = _overlay_gains(oracle, base, numpy.asarray(outside))
        largest = float(gains.max())
    else:
        current = nashwelfare.multilinear.eval_exact(oracle, base)
        largest = 0.0
    mass = float(y_i[list(large)].sum()) if large else 0.0
    tolerance = nashwelfare.multilinear.FEASIBILITY_TOLERANCE
    return {
        'agent': i,
        'large_set': list(large),
        'mass': mass,
        'max_marginal': largest,
        'marginal_bound': current / c,
        'mass_ok': c - tolerance <= mass <= c + 1 + tolerance,
        'marginal_ok': largest <= current / c + tolerance,
    }


class SparsifiedSolution(object):
    """
    Per agent: the large set L_i, the small items S_i it received in the
    rounding, and the vector y_i^(L_i) + 1_(S_i). Agents outside A' have
    empty sets and zero rows.
    """

    def __init__(self, large_sets, small_sets, y_sparse, outcome):
        self.large_sets = large_sets
        self.small_sets = small_sets
        self.y_sparse = y_sparse
        self.outcome = outcome

    def to_dict(self):
        return {
            'large_sets': self.large_sets,
            'small_sets': self.small_sets,
            'y_sparse': [[float(x) for x in row] for row in self.y_sparse],
        }


def large_sets(instance, y, c, agents, items):
    y = _matrix(y)
    return {i: find_large_set(instance, i, y[i], c, items) for i in agents}


def restricted_randomized_rounding(instance, y, c, rng, agents, items, outcome=None, large=None):
    """
    Round y once (or reuse 'outcome'), keep for every agent only the items
    outside its large set, and return the sparsified solution. The result
    need not be a feasible allocation.
    """
    matrix = _matrix(y)
    if large is None:
        large = large_sets(instance, matrix, c, agents, items)
    if outcome is None:
        outcome = randomized_rounding(y, rng)
    n = matrix.shape[0]
    large_list = [[] for _ in range(n)]
    small_list = [[] for _ in range(n)]
    y_sparse = numpy.zeros_like(matrix)
    for i in agents:
        L = set(large[i])
        small = [j for j in items if j not in L and outcome.Z[j] == i]
        large_list[i] = sorted(L)
        small_list[i] = small
        y_sparse[i] = nashwelfare.multilinear.overlay(nashwelfare.multilinear.restrict(matrix[i], L), small)
    return SparsifiedSolution(large_list, small_list, y_sparse, outcome)


def small_items_bound(c):
    """
    Return 3 (2 + 4/c), the bound the sparsified solution meets with constant
    probability when the greedy certificate is at most e.
    """
    return 3.0 * (2.0 + 4.0 / c)


def small_items_success_rate(instance, y, agents, items, bundles, c, seeds, bound=None, seed=0):
    """
    Pad y, then over 'seeds' restricted roundings measure how often
    (1/n) sum over A' of V_i(y*_i) / V_i(y^(s)_i) stays within 'bound', with y*
    the indicator of the reference allocation 'bundles' restricted to G'.
    """
    bound = small_items_bound(c) if bound is None else bound
    padded_instance, padded_y = pad_with_dummies(instance, y, c, agents)
    m = instance.m
    candidates = list(items) + list(range(m, padded_instance.m))
    large = large_sets(padded_instance, padded_y, c, agents, candidates)

    items_set = set(items)
    reference = {}
    for i in agents:
        bundle = [j for j in bundles[i] if j in items_set]
        reference[i] = padded_instance.oracles[i].value(bundle)

    successes = 0
    ratios = []
    for s in range(seeds):
        rng = nashwelfare.spawn_rng(seed, nashwelfare.STREAM_RESTRICTED, s)
        sparse = restricted_randomized_rounding(padded_instance, padded_y, c, rng, agents, candidates, large=large)
        total = []
        for i in agents:
            value = nashwelfare.multilinear.eval_exact(padded_instance.oracles[i], sparse.y_sparse[i])
            if value <= 0:
                total.append(0.0 if reference[i] <= 0 else math.inf)
            else:
                total.append(reference[i] / value)
        ratio = math.fsum(total) / instance.n
        ratios.append(ratio)
        if ratio <= bound:
            successes += 1
    frequency = successes / float(seeds) if seeds else 0.0
    logging.info('Small-items event held in %d of %d roundings (bound %.4g)' % (successes, seeds, bound))
    finite = [r for r in ratios if math.isfinite(r)]
    return {
        'seeds': seeds,
        'bound': bound,
        'successes': successes,
        'frequency': frequency,
        'threshold': (3.0 / math.e - 1.0) / 4.0,
        'median_ratio': float(numpy.median(finite)) if finite else None,
    }
