"""
Exact Nash social welfare by exhaustive enumeration, and the golden corpus
of small instances every guarantee is checked against.
"""

import math
import itertools
import logging

import numpy

import nashwelfare
import nashwelfare.exceptions
import nashwelfare.generators
import nashwelfare.valuations


BRUTE_FORCE_LIMIT = 10 ** 7
# Assignment vectors scored per vectorised block.
BLOCK_SIZE = 1 << 16
TABLE_CHUNK = 1 << 16
TIE_TOLERANCE = 1e-12

GOLDEN_FAMILIES = ('additive', 'coverage', 'budget_additive', 'partition_matroid_rank')
GOLDEN_AGENTS = (2, 3)
GOLDEN_ITEMS = tuple(range(3, 9))
GOLDEN_SEEDS = tuple(range(5))


class ExactResult(object):
    def __init__(self, allocation, log_nsw, assignment, enumerated):
        self.allocation = allocation
        self.log_nsw = log_nsw
        self.assignment = assignment
        self.enumerated = enumerated

    @property
    def nsw(self):
        return math.exp(self.log_nsw) if self.log_nsw > -math.inf else 0.0

    def to_dict(self):
        return {
            'allocation': self.allocation,
            'assignment': self.assignment,
            'log_nsw': nashwelfare.encode_log(self.log_nsw),
            'nsw': self.nsw,
            'enumerated': self.enumerated,
        }

    def __repr__(self):
        return '<ExactResult log_nsw=%s over %d allocations>' % (self.log_nsw, self.enumerated)


def check_allocation(instance, allocation, allow_unassigned=False):
    """
    Validate that 'allocation' gives disjoint bundles of valid items, one per
    agent, covering every item unless 'allow_unassigned' is set.
    """
    if len(allocation) != instance.n:
        raise nashwelfare.exceptions.InvalidAllocationException(
            'Expected %d bundles, got %d' % (instance.n, len(allocation))
        )
    owner = {}
    for i, bundle in enumerate(allocation):
        for j in bundle:
            if j < 0 or j >= instance.m:
                raise nashwelfare.exceptions.ItemRangeException('Item %d is outside the ground set' % j)
            if j in owner:
                raise nashwelfare.exceptions.InvalidAllocationException(
                    'Item %d is in the bundles of agents %d and %d' % (j, owner[j], i)
                )
            owner[j] = i
    if not allow_unassigned and len(owner) != instance.m:
        missing = sorted(set(range(instance.m)) - set(owner))
        raise nashwelfare.exceptions.InvalidAllocationException('Items %s are not assigned' % missing)


def nsw_value(instance, allocation, allow_unassigned=False):
    """
    Return (1/n) sum of log v_i(S_i), or -inf if some bundle is worth 0.
    """
    check_allocation(instance, allocation, allow_unassigned)
    logs = [nashwelfare.safe_log(instance.oracles[i].value(bundle)) for i, bundle in enumerate(allocation)]
    if any(x == -math.inf for x in logs):
        return nashwelfare.LOG_ZERO
    return math.fsum(logs) / instance.n


def _log_tables(instance, items):
    """
    Per agent, the log value of every subset of 'items', indexed by the
    bitmask over positions in 'items'.
    """
    k = len(items)
    tables = []
    for oracle in instance.oracles:
        table = numpy.empty(1 << k, dtype=float)
        for start in range(0, 1 << k, TABLE_CHUNK):
            masks = numpy.arange(start, min(start + TABLE_CHUNK, 1 << k), dtype=numpy.int64)
            bits = ((masks[:, None] >> numpy.arange(k, dtype=numpy.int64)[None, :]) & 1).astype(bool)
            member = numpy.zeros((len(masks), instance.m), dtype=bool)
            member[:, items] = bits
            table[start:start + len(masks)] = oracle.values(member)
        with numpy.errstate(divide='ignore'):
            tables.append(numpy.where(table > 0, numpy.log(numpy.maximum(table, 1e-300)), -numpy.inf))
    return tables


def _digits(indices, n, k):
    """
    Assignment vectors of the given indices in base n, most significant first.
    """
    powers = n ** numpy.arange(k - 1, -1, -1, dtype=numpy.int64)
    return (indices[:, None] // powers[None, :]) % n


class _Search(object):
    """
    Scan a space of assignment vectors for the largest score and the
    smallest index reaching it.
    """

    def __init__(self, n, k, tables, offsets=None):
        self.n = n
        self.k = k
        self.tables = tables
        self.offsets = offsets

    def scores(self, start, stop):
        indices = numpy.arange(start, stop, dtype=numpy.int64)
        digits = _digits(indices, self.n, self.k)
        weights = numpy.int64(1) << numpy.arange(self.k, dtype=numpy.int64)
        total = numpy.zeros(len(indices), dtype=float)
        for i in range(self.n):
            masks = (digits == i).astype(numpy.int64) @ weights
            if self.offsets is not None:
                masks = masks | self.offsets[i]
            total += self.tables[i][masks]
        return total / self.n

    def best(self):
        size = self.n ** self.k
        top = -math.inf
        for start in range(0, size, BLOCK_SIZE):
            top = max(top, float(self.scores(start, min(start + BLOCK_SIZE, size)).max()))
        if top == -math.inf:
            return top, 0
        threshold = top - TIE_TOLERANCE * max(1.0, abs(top))
        for start in range(0, size, BLOCK_SIZE):
            hits = numpy.flatnonzero(self.scores(start, min(start + BLOCK_SIZE, size)) >= threshold)
            if len(hits):
                return top, start + int(hits[0])
        return top, 0


def _result(instance, assignment, enumerated):
    allocation = [[j for j, owner in enumerate(assignment) if owner == i] for i in range(instance.n)]
    return ExactResult(allocation, nsw_value(instance, allocation), [int(a) for a in assignment], enumerated)


def brute_force_nsw(instance, limit=BRUTE_FORCE_LIMIT):
    """
    Enumerate all n^m assignments and return a maximizer of the Nash social
    welfare, the lexicographically smallest assignment vector among ties.
    """
    n, m = instance.n, instance.m
    size = n ** m
    if size > limit:
        raise nashwelfare.exceptions.SizeLimitException(
            'Brute force over %d^%d = %d assignments exceeds the limit of %d' % (n, m, size, limit)
        )
    tables = _log_tables(instance, list(range(m)))
    _, index = _Search(n, m, tables).best()
    assignment = _digits(numpy.array([index], dtype=numpy.int64), n, m)[0] if m else []
    result = _result(instance, assignment, size)
    logging.debug('Brute force over %d assignments: log NSW %s' % (size, result.log_nsw))
    return result


def brute_force_nsw_matched(instance, H, limit=BRUTE_FORCE_LIMIT):
    """
    Maximize the Nash social welfare over allocations giving the items of H
    as a perfect matching and the other items arbitrarily.
    """
    n, m = instance.n, instance.m
    H = sorted(H)
    if len(H) != n:
        raise nashwelfare.exceptions.InvalidInstanceException('H must hold exactly n = %d items, got %d' % (n, len(H)))
    rest = [j for j in range(m) if j not in set(H)]
    size = math.factorial(n) * n ** len(rest)
    if size > limit:
        raise nashwelfare.exceptions.SizeLimitException(
            'Matched brute force over %d allocations exceeds the limit of %d' % (size, limit)
        )
    # Tables over rest + H, so bit len(rest) + p stands for H[p].
    tables = _log_tables(instance, rest + H)
    top = -math.inf
    candidates = []
    for permutation in itertools.permutations(range(n)):
        offsets = [numpy.int64(1) << (len(rest) + permutation[i]) for i in range(n)]
        score, index = _Search(n, len(rest), tables, offsets).best()
        assignment = numpy.zeros(m, dtype=numpy.int64)
        if rest:
            assignment[rest] = _digits(numpy.array([index], dtype=numpy.int64), n, len(rest))[0]
        for i in range(n):
            assignment[H[permutation[i]]] = i
        candidates.append((score, [int(a) for a in assignment]))
        top = max(top, score)
    if top == -math.inf:
        winners = [vector for _, vector in candidates]
    else:
        threshold = top - TIE_TOLERANCE * max(1.0, abs(top))
        winners = [vector for score, vector in candidates if score >= threshold]
    return _result(instance, min(winners), size)


class GoldenCase(object):
    def __init__(self, name, instance, exact, notes=''):
        self.name = name
        self.instance = instance
        self.exact = exact
        self.notes = notes

    def __repr__(self):
        return '<GoldenCase %s>' % self.name


def tightness_instance(n=3):
    return nashwelfare.generators.generate_instance('tightness', n=n, m=2 * n, seed=0)


def degenerate_instances():
    """
    Return (name, instance, notes) for the degenerate corpus entries.
    """
    zero_agent = nashwelfare.valuations.Instance(
        [nashwelfare.valuations.AdditiveOracle([2.0, 1.0, 3.0]), nashwelfare.valuations.AdditiveOracle([0.0, 0.0, 0.0])],
        metadata={'generator': 'degenerate', 'case': 'zero-agent'},
    )
    few_items = nashwelfare.generators.generate_instance('additive', n=3, m=2, seed=0)
    single = nashwelfare.generators.generate_instance('coverage', n=1, m=4, seed=0)
    empty_cover = nashwelfare.generators.generate_instance('coverage', n=2, m=4, seed=0, density=0.0)
    return [
        ('degenerate-zero-agent', zero_agent, 'one agent values nothing, optimum 0'),
        ('degenerate-few-items', few_items, 'm < n, optimum 0'),
        ('degenerate-single-agent', single, 'n = 1'),
        ('degenerate-empty-coverage', empty_cover, 'coverage with density 0'),
    ]


def golden_instances(seeds=GOLDEN_SEEDS, families=GOLDEN_FAMILIES, agents=GOLDEN_AGENTS, items=GOLDEN_ITEMS):
    """
    Return the golden corpus as GoldenCase objects: the tightness instance,
    a seeded grid per family and the degenerate cases, each with its exact
    optimum computed on the spot.
    """
    entries = [('tightness-3', tightness_instance(3), 'OPT = 3^(1/3), matched optimum 1')]
    for family in families:
        for n in agents:
            for m in items:
                for seed in seeds:
                    instance = nashwelfare.generators.generate_instance(family, n=n, m=m, seed=seed)
                    entries.append(('%s-n%d-m%d-s%d' % (family, n, m, seed), instance, ''))
    entries.extend(degenerate_instances())
    cases = [GoldenCase(name, instance, brute_force_nsw(instance), notes) for name, instance, notes in entries]
    logging.info('Golden corpus holds %d instances' % len(cases))
    return cases
