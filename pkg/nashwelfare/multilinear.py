"""
Evaluation of the multilinear extension V(y) = E[v(R)], where R contains
each item j independently with probability y_j, and of its partial
derivatives. Evaluation is exact (closed form or enumeration of the
fractional support) or Monte Carlo.
"""

import math

import numpy

import nashwelfare.exceptions


FEASIBILITY_TOLERANCE = 1e-9
ENUMERATION_LIMIT = 25
# Number of support assignments evaluated per oracle call while enumerating.
ENUMERATION_CHUNK = 1 << 16

EXACT = 'exact'


class SampledMode(object):
    """
    Monte Carlo evaluation with a fixed number of samples drawn from a numpy
    random Generator.
    """

    def __init__(self, count, rng):
        if count < 1:
            raise nashwelfare.exceptions.InvalidInstanceException('Sample count must be at least 1, got %d' % count)
        self.count = int(count)
        self.rng = rng


class EstimateWithError(object):
    def __init__(self, mean, std_error, samples):
        self.mean = float(mean)
        self.std_error = float(std_error)
        self.samples = int(samples)

    def to_dict(self):
        return {'mean': self.mean, 'std_error': self.std_error, 'samples': self.samples}

    def __repr__(self):
        return '<Estimate %g +- %g (%d samples)>' % (self.mean, self.std_error, self.samples)


class FractionalAllocation(object):
    """
    An n x m matrix y with entries in [0,1] and column sums at most 1, up to
    FEASIBILITY_TOLERANCE.
    """

    def __init__(self, y, validate=True):
        self.y = numpy.array(y, dtype=float)
        if self.y.ndim != 2:
            raise nashwelfare.exceptions.InvalidInstanceException('A fractional allocation must be a matrix')
        if validate:
            self.validate()

    @classmethod
    def zeros(cls, n, m):
        return cls(numpy.zeros((n, m), dtype=float), validate=False)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def m(self):
        return self.y.shape[1]

    def validate(self):
        if numpy.isnan(self.y).any():
            raise nashwelfare.exceptions.InfeasibleAllocationException('Fractional allocation contains NaN')
        if (self.y < -FEASIBILITY_TOLERANCE).any() or (self.y > 1 + FEASIBILITY_TOLERANCE).any():
            raise nashwelfare.exceptions.InfeasibleAllocationException('Fractional allocation has entries outside [0,1]')
        sums = self.column_sums()
        if len(sums) and sums.max() > 1 + FEASIBILITY_TOLERANCE:
            j = int(numpy.argmax(sums))
            raise nashwelfare.exceptions.InfeasibleAllocationException(
                'Item %d is allocated %.12g > 1 times' % (j, sums[j])
            )

    def column_sums(self):
        return self.y.sum(axis=0)

    def row(self, i):
        return self.y[i].copy()

    def mass(self, i, items=None):
        if items is None:
            return float(self.y[i].sum())
        return float(self.y[i, list(items)].sum())

    def scaled(self, factor):
        return FractionalAllocation(self.y * factor)

    def restrict(self, i, items):
        return restrict(self.y[i], items)

    def overlay(self, i, items):
        return overlay(self.y[i], items)

    def copy(self):
        return FractionalAllocation(self.y.copy(), validate=False)

    def to_list(self):
        return [[float(x) for x in row] for row in self.y]


def restrict(y_i, items):
    """
    Return a copy of y_i with every coordinate outside 'items' set to 0.
    """
    y_i = numpy.asarray(y_i, dtype=float)
    result = numpy.zeros_like(y_i)
    items = list(items)
    result[items] = y_i[items]
    return result


def overlay(y_i, items):
    """
    Return a copy of y_i with every coordinate in 'items' set to 1.
    """
    result = numpy.array(y_i, dtype=float)
    result[list(items)] = 1.0
    return result


def fractional_support(y_i):
    y_i = numpy.asarray(y_i)
    return numpy.flatnonzero((y_i > 0) & (y_i < 1))


def supports_exact(oracle, y_i, limit=ENUMERATION_LIMIT):
    """
    Return True if V(y_i) can be evaluated exactly.
    """
    return oracle.closed_form or len(fractional_support(y_i)) <= limit


def eval_exact(oracle, y_i, limit=ENUMERATION_LIMIT):
    """
    Return V(y_i) exactly, through the oracle's closed form when it has one,
    otherwise by enumerating all outcomes on the fractional coordinates.
    """
    y_i = numpy.asarray(y_i, dtype=float)
    if oracle.closed_form:
        return float(oracle.extension(y_i[None, :])[0])

    support = fractional_support(y_i)
    if len(support) > limit:
        raise nashwelfare.exceptions.EnumerationLimitException(
            'Cannot evaluate a %s valuation exactly on %d fractional coordinates (limit %d)'
            % (oracle.family, len(support), limit)
        )
    base = y_i >= 1
    p = y_i[support]
    k = len(support)
    total = 0.0
    bits = numpy.arange(k, dtype=numpy.int64)
    for start in range(0, 1 << k, ENUMERATION_CHUNK):
        masks = numpy.arange(start, min(start + ENUMERATION_CHUNK, 1 << k), dtype=numpy.int64)
        chosen = ((masks[:, None] >> bits[None, :]) & 1).astype(bool)
        member = numpy.repeat(base[None, :], len(masks), axis=0)
        member[:, support] = chosen
        weights = numpy.prod(numpy.where(chosen, p[None, :], 1.0 - p[None, :]), axis=1)
        total += float(weights @ oracle.values(member))
    return total


def draw_sets(y_i, count, rng):
    """
    Draw 'count' random sets, each item j included with probability y_j.
    """
    y_i = numpy.asarray(y_i, dtype=float)
    return rng.random((count, len(y_i))) < y_i[None, :]


def _estimate(samples):
    count = len(samples)
    mean = float(samples.mean())
    if count > 1:
        std_error = float(samples.std(ddof=1)) / math.sqrt(count)
    else:
        std_error = 0.0
    return EstimateWithError(mean, std_error, count)


def eval_sample(oracle, y_i, sample_count, rng):
    """
    Return a Monte Carlo estimate of V(y_i) from 'sample_count' draws.
    """
    if sample_count < 1:
        raise nashwelfare.exceptions.InvalidInstanceException('Sample count must be at least 1, got %d' % sample_count)
    return _estimate(oracle.values(draw_sets(y_i, sample_count, rng)))


def evaluate(oracle, y_i, mode=EXACT):
    """
    Evaluate V(y_i) in the given mode. Exact mode returns a float, sampled
    mode an EstimateWithError.
    """
    if mode == EXACT:
        return eval_exact(oracle, y_i)
    return eval_sample(oracle, y_i, mode.count, mode.rng)


def partial_derivative(oracle, y_i, j, mode=EXACT):
    """
    Return dV/dy_j at y_i. V is linear in each coordinate, so the exact
    derivative is V(y with y_j = 1) - V(y with y_j = 0).
    """
    y_i = numpy.asarray(y_i, dtype=float)
    if j < 0 or j >= len(y_i):
        raise nashwelfare.exceptions.ItemRangeException('Item %d is outside the ground set of size %d' % (j, len(y_i)))
    if mode == EXACT:
        high = y_i.copy()
        high[j] = 1.0
        low = y_i.copy()
        low[j] = 0.0
        return eval_exact(oracle, high) - eval_exact(oracle, low)
    sets = draw_sets(y_i, mode.count, mode.rng)
    return _estimate(oracle.marginals(sets)[:, j])


def gradient(oracle, y_i, items, mode=EXACT):
    """
    Return the partial derivatives over 'items' and their standard errors as
    two arrays. Exact mode has zero standard errors; sampled mode estimates
    all derivatives from one shared batch of random sets.
    """
    y_i = numpy.asarray(y_i, dtype=float)
    items = numpy.asarray(list(items), dtype=numpy.int64)
    if len(items) == 0:
        return numpy.zeros(0), numpy.zeros(0)

    if mode == EXACT:
        if oracle.closed_form:
            points = numpy.repeat(y_i[None, :], 2 * len(items), axis=0)
            rows = numpy.arange(len(items))
            points[2 * rows, items] = 1.0
            points[2 * rows + 1, items] = 0.0
            values = oracle.extension(points)
            derivatives = values[0::2] - values[1::2]
        else:
            derivatives = numpy.array([partial_derivative(oracle, y_i, int(j)) for j in items])
        return derivatives, numpy.zeros(len(items))

    sets = draw_sets(y_i, mode.count, mode.rng)
    marginals = oracle.marginals(sets)[:, items]
    means = marginals.mean(axis=0)
    if mode.count > 1:
        errors = marginals.std(axis=0, ddof=1) / math.sqrt(mode.count)
    else:
        errors = numpy.zeros(len(items))
    return means, errors


def eval_overlay(oracle, y_i, items, mode=EXACT):
    """
    Return V(y_i with the coordinates in 'items' forced to 1).
    """
    return evaluate(oracle, overlay(y_i, items), mode)
