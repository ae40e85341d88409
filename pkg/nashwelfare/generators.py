"""
Seeded instance generators. The same (family, sizes, parameters, seed)
always produce the same instance, and therefore the same instance file.
"""

import numpy

import nashwelfare
import nashwelfare.exceptions
import nashwelfare.valuations


GENERATORS = ('additive', 'coverage', 'budget_additive', 'partition_matroid_rank', 'tightness')

DEFAULTS = {
    'additive': {'max_weight': 9, 'zero_fraction': 0.2},
    'coverage': {'universe': None, 'density': 0.3, 'max_weight': 5},
    'budget_additive': {'max_weight': 9, 'budget_low': 0.3, 'budget_high': 0.8},
    'partition_matroid_rank': {'blocks': None, 'max_capacity': 2},
    'tightness': {},
}


def _integers(rng, low, high, size):
    return [float(x) for x in rng.integers(low, high + 1, size=size)]


def _additive(rng, m, params):
    weights = _integers(rng, 1, params['max_weight'], m)
    zero = rng.random(m) < params['zero_fraction']
    return nashwelfare.valuations.AdditiveOracle([0.0 if z else w for w, z in zip(weights, zero)])


def _coverage(rng, m, params):
    universe = params['universe'] or max(m, 1)
    weights = _integers(rng, 1, params['max_weight'], universe)
    cover = rng.random((m, universe)) < params['density']
    incidence = [[int(u) for u in numpy.flatnonzero(row)] for row in cover]
    return nashwelfare.valuations.CoverageOracle(weights, incidence)


def _budget_additive(rng, m, params):
    weights = _integers(rng, 1, params['max_weight'], m)
    fraction = rng.uniform(params['budget_low'], params['budget_high'])
    budget = max(1.0, float(numpy.floor(fraction * sum(weights))))
    return nashwelfare.valuations.BudgetAdditiveOracle(weights, budget)


def _partition_matroid_rank(rng, m, params):
    count = params['blocks'] or max(1, m // 3)
    owner = rng.integers(0, count, size=m)
    blocks = [[int(j) for j in numpy.flatnonzero(owner == b)] for b in range(count)]
    capacities = _integers(rng, 1, params['max_capacity'], count)
    return nashwelfare.valuations.PartitionMatroidRankOracle(m, blocks, capacities)


FAMILY_BUILDERS = {
    'additive': _additive,
    'coverage': _coverage,
    'budget_additive': _budget_additive,
    'partition_matroid_rank': _partition_matroid_rank,
}


def tightness(n):
    """
    The instance on which the matched optimum loses a factor 3^(1/3): items
    0..n-1 form H and items n..2n-1 the rest; the first n/3 agents value
    |S intersected with H| and the others min(|S|, 1).
    """
    if n < 3 or n % 3:
        raise nashwelfare.exceptions.InvalidInstanceException('The tightness instance needs n divisible by 3, got %d' % n)
    m = 2 * n
    oracles = []
    for i in range(n):
        if i < n // 3:
            oracles.append(nashwelfare.valuations.AdditiveOracle([1.0] * n + [0.0] * n))
        else:
            oracles.append(nashwelfare.valuations.CoverageOracle([1.0], [[0]] * m))
    labels = {
        'agents': ['h%d' % i if i < n // 3 else 'g%d' % i for i in range(n)],
        'items': ['H%d' % j if j < n else 'G%d' % (j - n) for j in range(m)],
    }
    return oracles, labels


def generate_instance(family, n, m, seed, **params):
    """
    Generate an instance of n agents and m items whose valuations are drawn
    independently from 'family'.
    """
    if family not in GENERATORS:
        raise nashwelfare.exceptions.InvalidInstanceException(
            "Unknown generator '%s'; choose from %s" % (family, ', '.join(GENERATORS))
        )
    if not isinstance(n, int) or n < 1:
        raise nashwelfare.exceptions.InvalidInstanceException('n must be an integer >= 1, got %r' % (n,))
    if not isinstance(m, int) or m < 0:
        raise nashwelfare.exceptions.InvalidInstanceException('m must be an integer >= 0, got %r' % (m,))
    unknown = set(params) - set(DEFAULTS[family])
    if unknown:
        raise nashwelfare.exceptions.InvalidInstanceException(
            'Unknown parameters for %s: %s' % (family, ', '.join(sorted(unknown)))
        )
    settings = dict(DEFAULTS[family])
    settings.update((k, v) for k, v in params.items() if v is not None)

    metadata = {'generator': family, 'seed': int(seed), 'params': dict((k, v) for k, v in settings.items()
                                                                       if v is not None)}
    if family == 'tightness':
        if m != 2 * n:
            raise nashwelfare.exceptions.InvalidInstanceException('The tightness instance has m = 2n = %d items' % (2 * n))
        oracles, labels = tightness(n)
        return nashwelfare.valuations.Instance(oracles, labels=labels, metadata=metadata)

    if family == 'coverage' and not 0 <= settings['density'] <= 1:
        raise nashwelfare.exceptions.InvalidInstanceException('density must lie in [0, 1]')
    rng = nashwelfare.spawn_rng(seed, nashwelfare.STREAM_GENERATOR, GENERATORS.index(family), n, m)
    builder = FAMILY_BUILDERS[family]
    oracles = [builder(rng, m, settings) for _ in range(n)]
    return nashwelfare.valuations.Instance(oracles, metadata=metadata)
