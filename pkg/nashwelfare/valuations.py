"""
Value oracles for monotone submodular valuations.

Every oracle answers value queries on item sets of a fixed ground set. All
families evaluate many sets at once from a boolean membership matrix with one
row per set, which is what the multilinear and reference modules build on.
"""

import math
import logging

import numpy

import nashwelfare
import nashwelfare.exceptions


FAMILIES = (
    'additive',
    'coverage',
    'budget_additive',
    'partition_matroid_rank',
    'explicit_table',
)

# Ground sets up to this size are checked exhaustively.
EXHAUSTIVE_LIMIT = 12
# Number of random (S, j, k) triples checked above the exhaustive limit.
SAMPLED_CHECKS = 2000
PROPERTY_TOLERANCE = 1e-9


def all_memberships(ground_size):
    """
    Return the 2^m x m membership matrix of all subsets, row index = bitmask.
    """
    masks = numpy.arange(1 << ground_size, dtype=numpy.int64)
    bits = numpy.arange(ground_size, dtype=numpy.int64)
    return ((masks[:, None] >> bits[None, :]) & 1).astype(bool)


def items_of(row):
    """
    Return the sorted item list of a membership row.
    """
    return [int(j) for j in numpy.flatnonzero(row)]


def _as_float_list(values, field):
    if not isinstance(values, list):
        raise nashwelfare.exceptions.InvalidInstanceException('%s: expected a list of numbers' % field)
    try:
        result = [float(x) for x in values]
    except (TypeError, ValueError):
        raise nashwelfare.exceptions.InvalidInstanceException('%s: expected a list of numbers' % field)
    for x in result:
        if math.isnan(x) or math.isinf(x):
            raise nashwelfare.exceptions.InvalidInstanceException('%s: values must be finite' % field)
        if x < 0:
            raise nashwelfare.exceptions.InvalidInstanceException('%s: values must be non-negative' % field)
    return result


class ValuationOracle(object):
    """
    Base class of all value oracles. Oracles are immutable after construction
    and can be queried concurrently.
    """
    family = None
    closed_form = False

    def __init__(self, ground_size):
        self.ground_size = int(ground_size)
        self.metadata = {}

    def membership(self, items):
        """
        Turn an iterable of item indices into a membership row, validating the
        indices against the ground set.
        """
        row = numpy.zeros(self.ground_size, dtype=bool)
        for j in items:
            j = int(j)
            if j < 0 or j >= self.ground_size:
                raise nashwelfare.exceptions.ItemRangeException(
                    'Item %d is outside the ground set of size %d' % (j, self.ground_size)
                )
            row[j] = True
        return row

    def value(self, items):
        """
        Return v(S) for an iterable of item indices.
        """
        row = self.membership(items)
        return float(self.values(row[None, :])[0])

    def marginal(self, items, j):
        """
        Return v(S+j) - v(S-j).
        """
        row = self.membership(items)
        self.membership([j])
        pair = numpy.vstack([row, row])
        pair[0, j] = True
        pair[1, j] = False
        values = self.values(pair)
        return float(values[0] - values[1])

    def singleton_values(self):
        return self.values(numpy.eye(self.ground_size, dtype=bool))

    def values(self, member):
        """
        Return the values of all sets given as rows of a boolean matrix.
        """
        raise NotImplementedError()

    def marginals(self, member):
        """
        Return the matrix of v(R+j) - v(R-j) for every row R and every item j.
        Families override this with a vectorised formula.
        """
        member = numpy.asarray(member, dtype=bool)
        result = numpy.zeros(member.shape, dtype=float)
        for j in range(self.ground_size):
            with_j = member.copy()
            with_j[:, j] = True
            without_j = member.copy()
            without_j[:, j] = False
            result[:, j] = self.values(with_j) - self.values(without_j)
        return result

    def extension(self, points):
        """
        Closed-form multilinear extension at the rows of a matrix of points in
        [0,1]^m. Only available when closed_form is True.
        """
        raise NotImplementedError('%s valuations have no closed-form extension' % self.family)

    def params(self):
        raise NotImplementedError()

    def to_dict(self):
        return {'family': self.family, 'params': self.params()}

    def padded(self, extra):
        """
        Return this oracle on a ground set extended by 'extra' zero-valued items.
        """
        return PaddedOracle(self, extra)

    def scaled(self, factor):
        """
        Return this oracle with every value multiplied by 'factor' > 0.
        """
        return ScaledOracle(self, factor)

    def __repr__(self):
        return '<%s valuation on %d items>' % (self.family, self.ground_size)


class AdditiveOracle(ValuationOracle):
    family = 'additive'
    closed_form = True

    def __init__(self, weights):
        self.weights = numpy.array(weights, dtype=float)
        super(AdditiveOracle, self).__init__(len(self.weights))

    def values(self, member):
        return numpy.asarray(member, dtype=float) @ self.weights

    def marginals(self, member):
        member = numpy.asarray(member)
        return numpy.broadcast_to(self.weights, member.shape).copy()

    def extension(self, points):
        return numpy.asarray(points, dtype=float) @ self.weights

    def params(self):
        return {'weights': [float(w) for w in self.weights]}


class CoverageOracle(ValuationOracle):
    """
    Weighted coverage: v(S) is the total weight of universe elements covered by
    at least one item of S.
    """
    family = 'coverage'
    closed_form = True

    # Products of (1 - y) switch to the log domain below this factor.
    LOG_DOMAIN_THRESHOLD = 1e-12

    def __init__(self, universe_weights, incidence):
        self.universe_weights = numpy.array(universe_weights, dtype=float)
        self.incidence = [sorted(set(int(u) for u in elements)) for elements in incidence]
        super(CoverageOracle, self).__init__(len(self.incidence))
        self.cover = numpy.zeros((self.ground_size, len(self.universe_weights)), dtype=bool)
        for j, elements in enumerate(self.incidence):
            self.cover[j, elements] = True
        self._cover_float = self.cover.astype(float)

    def _counts(self, member):
        return numpy.asarray(member, dtype=float) @ self._cover_float

    def values(self, member):
        covered = (self._counts(member) > 0).astype(float)
        return covered @ self.universe_weights

    def marginals(self, member):
        member = numpy.asarray(member, dtype=bool)
        counts = self._counts(member)
        # An absent item gains the elements nobody covers; a present item is
        # the only cover of the elements counted exactly once.
        gain_absent = ((counts == 0) * self.universe_weights) @ self._cover_float.T
        gain_present = ((counts == 1) * self.universe_weights) @ self._cover_float.T
        return numpy.where(member, gain_present, gain_absent)

    def extension(self, points):
        points = numpy.atleast_2d(numpy.asarray(points, dtype=float))
        remaining = 1.0 - points
        incident = self.cover[None, :, :]
        factors = numpy.where(incident, remaining[:, :, None], 1.0)
        uncovered = numpy.prod(factors, axis=1)
        # Rows with tiny factors are recomputed in the log domain.
        tiny = ((factors > 0) & (factors < self.LOG_DOMAIN_THRESHOLD)).any(axis=(1, 2))
        if tiny.any():
            sub = factors[tiny]
            zero = (sub == 0).any(axis=1)
            logs = numpy.log(numpy.where(sub > 0, sub, 1.0)).sum(axis=1)
            uncovered[tiny] = numpy.where(zero, 0.0, numpy.exp(logs))
        return (1.0 - uncovered) @ self.universe_weights

    def params(self):
        return {
            'universe_weights': [float(w) for w in self.universe_weights],
            'incidence': [list(elements) for elements in self.incidence],
        }


class BudgetAdditiveOracle(ValuationOracle):
    family = 'budget_additive'

    def __init__(self, weights, budget):
        self.weights = numpy.array(weights, dtype=float)
        self.budget = float(budget)
        super(BudgetAdditiveOracle, self).__init__(len(self.weights))

    def values(self, member):
        return numpy.minimum(numpy.asarray(member, dtype=float) @ self.weights, self.budget)

    def marginals(self, member):
        member = numpy.asarray(member, dtype=bool)
        total = member.astype(float) @ self.weights
        without = total[:, None] - member * self.weights[None, :]
        return (numpy.minimum(without + self.weights[None, :], self.budget)
                - numpy.minimum(without, self.budget))

    def params(self):
        return {'weights': [float(w) for w in self.weights], 'budget': self.budget}


class PartitionMatroidRankOracle(ValuationOracle):
    """
    Rank function of a partition matroid: v(S) = sum over blocks of
    min(|S intersected with the block|, capacity). Items outside every block
    are worth nothing.
    """
    family = 'partition_matroid_rank'
    closed_form = True

    def __init__(self, ground_size, blocks, capacities):
        super(PartitionMatroidRankOracle, self).__init__(ground_size)
        self.blocks = [sorted(int(j) for j in block) for block in blocks]
        self.capacities = [float(c) for c in capacities]

    def values(self, member):
        member = numpy.asarray(member, dtype=bool)
        total = numpy.zeros(member.shape[0], dtype=float)
        for block, capacity in zip(self.blocks, self.capacities):
            counts = member[:, block].sum(axis=1)
            total += numpy.minimum(counts, capacity)
        return total

    def marginals(self, member):
        member = numpy.asarray(member, dtype=bool)
        result = numpy.zeros(member.shape, dtype=float)
        for block, capacity in zip(self.blocks, self.capacities):
            counts = member[:, block].sum(axis=1)
            without = counts[:, None] - member[:, block]
            result[:, block] = numpy.minimum(without + 1, capacity) - numpy.minimum(without, capacity)
        return result

    def extension(self, points):
        points = numpy.atleast_2d(numpy.asarray(points, dtype=float))
        total = numpy.zeros(points.shape[0], dtype=float)
        for block, capacity in zip(self.blocks, self.capacities):
            # Distribution of |R intersected with the block| (Poisson-binomial).
            dist = numpy.zeros((points.shape[0], len(block) + 1), dtype=float)
            dist[:, 0] = 1.0
            for j in block:
                p = points[:, j][:, None]
                shifted = dist[:, :-1] * p
                dist = dist * (1.0 - p)
                dist[:, 1:] += shifted
            total += dist @ numpy.minimum(numpy.arange(len(block) + 1), capacity)
        return total

    def params(self):
        return {'blocks': [list(b) for b in self.blocks], 'capacities': list(self.capacities)}


class ExplicitTableOracle(ValuationOracle):
    """
    A valuation given by its full table of 2^m values, indexed by the subset
    bitmask with bit j standing for item j.
    """
    family = 'explicit_table'

    def __init__(self, table):
        self.table = numpy.array(table, dtype=float)
        ground_size = int(round(math.log2(len(self.table)))) if len(self.table) else 0
        super(ExplicitTableOracle, self).__init__(ground_size)
        self._bits = numpy.left_shift(numpy.int64(1), numpy.arange(ground_size, dtype=numpy.int64))

    def values(self, member):
        masks = numpy.asarray(member, dtype=numpy.int64) @ self._bits
        return self.table[masks]

    def params(self):
        return {'table': [float(v) for v in self.table]}


class ScaledOracle(ValuationOracle):
    def __init__(self, base, factor):
        if not factor > 0:
            raise nashwelfare.exceptions.InvalidInstanceException('Scale factor must be positive, got %s' % factor)
        super(ScaledOracle, self).__init__(base.ground_size)
        self.base = base
        self.factor = float(factor)
        self.family = base.family
        self.closed_form = base.closed_form

    def values(self, member):
        return self.factor * self.base.values(member)

    def marginals(self, member):
        return self.factor * self.base.marginals(member)

    def extension(self, points):
        return self.factor * self.base.extension(points)

    def params(self):
        return self.base.params()

    def to_dict(self):
        data = self.base.to_dict()
        data['scale'] = self.factor
        return data


class PaddedOracle(ValuationOracle):
    """
    An oracle whose ground set is extended by dummy items of value 0.
    """
    def __init__(self, base, extra):
        super(PaddedOracle, self).__init__(base.ground_size + int(extra))
        self.base = base
        self.extra = int(extra)
        self.family = base.family
        self.closed_form = base.closed_form

    def values(self, member):
        member = numpy.asarray(member)
        return self.base.values(member[:, :self.base.ground_size])

    def marginals(self, member):
        member = numpy.asarray(member)
        result = numpy.zeros(member.shape, dtype=float)
        result[:, :self.base.ground_size] = self.base.marginals(member[:, :self.base.ground_size])
        return result

    def extension(self, points):
        points = numpy.atleast_2d(numpy.asarray(points, dtype=float))
        return self.base.extension(points[:, :self.base.ground_size])

    def params(self):
        return self.base.params()

    def to_dict(self):
        data = self.base.to_dict()
        data['padding'] = self.extra
        return data


def build_oracle(spec, ground_size, field='oracle'):
    """
    Build a value oracle from a {family, params} specification. 'field' names
    the specification in error messages.
    """
    if not isinstance(spec, dict):
        raise nashwelfare.exceptions.InvalidInstanceException('%s: expected an object' % field)
    if spec.get('padding'):
        extra = spec['padding']
        if not isinstance(extra, int) or extra < 0 or extra > ground_size:
            raise nashwelfare.exceptions.InvalidInstanceException('%s.padding: invalid dummy item count' % field)
        base = dict((k, v) for k, v in spec.items() if k != 'padding')
        return build_oracle(base, ground_size - extra, field).padded(extra)
    family = spec.get('family')
    params = spec.get('params')
    if family not in FAMILIES:
        raise nashwelfare.exceptions.InvalidInstanceException(
            "%s.family: unknown valuation family '%s'" % (field, family)
        )
    if not isinstance(params, dict):
        raise nashwelfare.exceptions.InvalidInstanceException('%s.params: expected an object' % field)

    def need(key):
        if key not in params:
            raise nashwelfare.exceptions.InvalidInstanceException('%s.params.%s: missing' % (field, key))
        return params[key]

    def sized(key):
        values = _as_float_list(need(key), '%s.params.%s' % (field, key))
        if len(values) != ground_size:
            raise nashwelfare.exceptions.InvalidInstanceException(
                '%s.params.%s: expected %d entries, got %d' % (field, key, ground_size, len(values))
            )
        return values

    if family == 'additive':
        oracle = AdditiveOracle(sized('weights'))

    elif family == 'coverage':
        universe_weights = _as_float_list(need('universe_weights'), '%s.params.universe_weights' % field)
        incidence = need('incidence')
        if not isinstance(incidence, list) or len(incidence) != ground_size:
            raise nashwelfare.exceptions.InvalidInstanceException(
                '%s.params.incidence: expected %d element lists' % (field, ground_size)
            )
        for j, elements in enumerate(incidence):
            if not isinstance(elements, list):
                raise nashwelfare.exceptions.InvalidInstanceException(
                    '%s.params.incidence[%d]: expected a list of elements' % (field, j)
                )
            for u in elements:
                if not isinstance(u, int) or u < 0 or u >= len(universe_weights):
                    raise nashwelfare.exceptions.InvalidInstanceException(
                        '%s.params.incidence[%d]: element %r is not in the universe' % (field, j, u)
                    )
        oracle = CoverageOracle(universe_weights, incidence)

    elif family == 'budget_additive':
        budget = _as_float_list([need('budget')], '%s.params.budget' % field)[0]
        oracle = BudgetAdditiveOracle(sized('weights'), budget)

    elif family == 'partition_matroid_rank':
        blocks = need('blocks')
        capacities = _as_float_list(need('capacities'), '%s.params.capacities' % field)
        if not isinstance(blocks, list) or len(blocks) != len(capacities):
            raise nashwelfare.exceptions.InvalidInstanceException(
                '%s.params.blocks: expected one block per capacity' % field
            )
        seen = set()
        for b, block in enumerate(blocks):
            if not isinstance(block, list):
                raise nashwelfare.exceptions.InvalidInstanceException(
                    '%s.params.blocks[%d]: expected a list of items' % (field, b)
                )
            for j in block:
                if not isinstance(j, int) or j < 0 or j >= ground_size:
                    raise nashwelfare.exceptions.InvalidInstanceException(
                        '%s.params.blocks[%d]: item %r is outside the ground set' % (field, b, j)
                    )
                if j in seen:
                    raise nashwelfare.exceptions.InvalidInstanceException(
                        '%s.params.blocks[%d]: item %d appears in two blocks' % (field, b, j)
                    )
                seen.add(j)
        oracle = PartitionMatroidRankOracle(ground_size, blocks, capacities)

    else:
        table = _as_float_list(need('table'), '%s.params.table' % field)
        if len(table) != 1 << ground_size:
            raise nashwelfare.exceptions.InvalidInstanceException(
                '%s.params.table: expected 2^%d = %d entries, got %d'
                % (field, ground_size, 1 << ground_size, len(table))
            )
        oracle = ExplicitTableOracle(table)
        if ground_size <= EXHAUSTIVE_LIMIT:
            report = check_properties(oracle)
            if not report.ok:
                raise nashwelfare.exceptions.PropertyViolationException(
                    '%s: explicit table is not monotone submodular: %s' % (field, report.describe()),
                    report=report,
                )
        else:
            logging.warning('%s: explicit table on %d items accepted without property check' % (field, ground_size))
            oracle.metadata['unchecked'] = True

    if 'scale' in spec:
        factor = spec['scale']
        if isinstance(factor, bool) or not isinstance(factor, (int, float)) or not 0 < factor < math.inf:
            raise nashwelfare.exceptions.InvalidInstanceException(
                '%s.scale: expected a positive number, got %r' % (field, factor)
            )
        oracle = oracle.scaled(factor)
    return oracle


def value(oracle, items):
    return oracle.value(items)


def marginal(oracle, items, j):
    return oracle.marginal(items, j)


class PropertyReport(object):
    """
    Outcome of a monotonicity and submodularity check, with the first
    violating witness found for each property.
    """

    def __init__(self, mode, checked):
        self.mode = mode
        self.checked = checked
        self.normalized = True
        self.nonnegative = True
        self.monotone = True
        self.submodular = True
        self.monotone_witness = None
        self.submodular_witness = None

    @property
    def ok(self):
        return self.normalized and self.nonnegative and self.monotone and self.submodular

    def describe(self):
        problems = []
        if not self.normalized:
            problems.append('v(empty set) is not 0')
        if not self.nonnegative:
            problems.append('negative values')
        if not self.monotone:
            problems.append('not monotone at %s' % self.monotone_witness)
        if not self.submodular:
            problems.append('not submodular at %s' % self.submodular_witness)
        return ', '.join(problems) or 'ok'

    def to_dict(self):
        return {
            'mode': self.mode,
            'checked': self.checked,
            'normalized': self.normalized,
            'nonnegative': self.nonnegative,
            'monotone': self.monotone,
            'submodular': self.submodular,
            'monotone_witness': self.monotone_witness,
            'submodular_witness': self.submodular_witness,
        }


def _submodular_witness(base, j, k):
    return {
        'S': sorted(base + [j]),
        'T': sorted(base + [k]),
        'base': list(base),
        'j': j,
        'k': k,
    }


def check_properties(oracle, seed=0):
    """
    Check normalization, monotonicity and submodularity. Ground sets up to
    EXHAUSTIVE_LIMIT items are checked exhaustively through the pairwise
    marginal condition v(S+j) + v(S+k) >= v(S+j+k) + v(S); larger ones on
    SAMPLED_CHECKS random triples.
    """
    m = oracle.ground_size
    if m <= EXHAUSTIVE_LIMIT:
        return _check_exhaustive(oracle)
    return _check_sampled(oracle, seed)


def _check_exhaustive(oracle):
    m = oracle.ground_size
    table = oracle.values(all_memberships(m))
    masks = numpy.arange(1 << m, dtype=numpy.int64)
    tolerance = PROPERTY_TOLERANCE * max(1.0, float(numpy.abs(table).max()) if len(table) else 1.0)
    report = PropertyReport('exhaustive', len(table))
    report.normalized = abs(table[0]) <= tolerance
    report.nonnegative = bool((table >= -tolerance).all())

    for j in range(m):
        bit_j = numpy.int64(1) << j
        base = masks[(masks & bit_j) == 0]
        bad = numpy.flatnonzero(table[base | bit_j] < table[base] - tolerance)
        if len(bad):
            report.monotone = False
            report.monotone_witness = {'S': _bits_to_items(base[bad[0]], m), 'j': j}
            break

    for j in range(m):
        for k in range(j + 1, m):
            bit_j = numpy.int64(1) << j
            bit_k = numpy.int64(1) << k
            base = masks[(masks & (bit_j | bit_k)) == 0]
            lhs = table[base | bit_j] + table[base | bit_k]
            rhs = table[base | bit_j | bit_k] + table[base]
            bad = numpy.flatnonzero(lhs < rhs - tolerance)
            if len(bad):
                report.submodular = False
                report.submodular_witness = _submodular_witness(_bits_to_items(base[bad[0]], m), j, k)
                return report
    return report


def _check_sampled(oracle, seed):
    m = oracle.ground_size
    rng = nashwelfare.spawn_rng(seed, nashwelfare.STREAM_PROPERTIES)
    report = PropertyReport('sampled', SAMPLED_CHECKS)
    empty = oracle.values(numpy.zeros((1, m), dtype=bool))[0]
    report.normalized = abs(empty) <= PROPERTY_TOLERANCE

    member = rng.random((SAMPLED_CHECKS, m)) < 0.5
    j = rng.integers(0, m, size=SAMPLED_CHECKS)
    k = (j + rng.integers(1, m, size=SAMPLED_CHECKS)) % m
    rows = numpy.arange(SAMPLED_CHECKS)
    base = member.copy()
    base[rows, j] = False
    base[rows, k] = False
    with_j = base.copy()
    with_j[rows, j] = True
    with_k = base.copy()
    with_k[rows, k] = True
    both = with_j.copy()
    both[rows, k] = True

    v_base = oracle.values(base)
    v_j = oracle.values(with_j)
    v_k = oracle.values(with_k)
    v_both = oracle.values(both)
    tolerance = PROPERTY_TOLERANCE * max(1.0, float(numpy.abs(v_both).max()))
    report.nonnegative = bool((v_base >= -tolerance).all())

    bad = numpy.flatnonzero(v_j < v_base - tolerance)
    if len(bad):
        report.monotone = False
        report.monotone_witness = {'S': items_of(base[bad[0]]), 'j': int(j[bad[0]])}
    bad = numpy.flatnonzero(v_j + v_k < v_both + v_base - tolerance)
    if len(bad):
        report.submodular = False
        report.submodular_witness = _submodular_witness(items_of(base[bad[0]]), int(j[bad[0]]), int(k[bad[0]]))
    return report


def _bits_to_items(mask, m):
    return [j for j in range(m) if (int(mask) >> j) & 1]


class Instance(object):
    """
    An allocation problem: n agents, m items and one value oracle per agent,
    with optional labels and provenance metadata.
    """

    def __init__(self, oracles, labels=None, metadata=None):
        self.oracles = list(oracles)
        if len(self.oracles) < 1:
            raise nashwelfare.exceptions.InvalidInstanceException('An instance needs at least one agent')
        sizes = set(o.ground_size for o in self.oracles)
        if len(sizes) != 1:
            raise nashwelfare.exceptions.InvalidInstanceException(
                'All oracles must share one ground set, got sizes %s' % sorted(sizes)
            )
        self.labels = labels
        self.metadata = dict(metadata or {})

    @property
    def n(self):
        return len(self.oracles)

    @property
    def m(self):
        return self.oracles[0].ground_size

    def value(self, agent, items):
        return self.oracles[agent].value(items)

    def bundle_values(self, bundles):
        return [self.oracles[i].value(bundle) for i, bundle in enumerate(bundles)]

    def singleton_values(self):
        """
        Return the n x m matrix of v_i({j}).
        """
        if self.m == 0:
            return numpy.zeros((self.n, 0), dtype=float)
        return numpy.vstack([o.singleton_values() for o in self.oracles])

    def padded(self, extra):
        """
        Return a copy of this instance with 'extra' dummy items of value 0
        appended to the ground set.
        """
        labels = None
        if self.labels and self.labels.get('items') is not None:
            labels = dict(self.labels)
            labels['items'] = list(self.labels['items']) + ['dummy%d' % k for k in range(extra)]
        metadata = dict(self.metadata)
        metadata['dummy_items'] = int(extra)
        return Instance([o.padded(extra) for o in self.oracles], labels=labels, metadata=metadata)

    def scaled(self, factors):
        """
        Return a copy of this instance with agent i's valuation scaled by factors[i].
        """
        return Instance(
            [o.scaled(f) for o, f in zip(self.oracles, factors)],
            labels=self.labels,
            metadata=self.metadata,
        )

    def to_dict(self):
        data = {
            'n': self.n,
            'm': self.m,
            'agents': [o.to_dict() for o in self.oracles],
        }
        if self.labels is not None:
            data['labels'] = self.labels
        if self.metadata:
            data['metadata'] = self.metadata
        return data

    @classmethod
    def from_dict(cls, data):
        """
        Build an instance from its JSON document, naming the offending field
        in every validation error.
        """
        if not isinstance(data, dict):
            raise nashwelfare.exceptions.InvalidInstanceException('instance: expected an object')
        for key in ('n', 'm', 'agents'):
            if key not in data:
                raise nashwelfare.exceptions.InvalidInstanceException('%s: missing' % key)
        n, m, agents = data['n'], data['m'], data['agents']
        if not isinstance(n, int) or n < 1:
            raise nashwelfare.exceptions.InvalidInstanceException('n: expected an integer >= 1, got %r' % (n,))
        if not isinstance(m, int) or m < 0:
            raise nashwelfare.exceptions.InvalidInstanceException('m: expected an integer >= 0, got %r' % (m,))
        if not isinstance(agents, list) or len(agents) != n:
            raise nashwelfare.exceptions.InvalidInstanceException('agents: expected %d entries' % n)
        oracles = [build_oracle(spec, m, field='agents[%d]' % i) for i, spec in enumerate(agents)]
        labels = data.get('labels')
        if labels is not None:
            if not isinstance(labels, dict):
                raise nashwelfare.exceptions.InvalidInstanceException('labels: expected an object')
            for key in ('agents', 'items'):
                if labels.get(key) is not None and not isinstance(labels[key], list):
                    raise nashwelfare.exceptions.InvalidInstanceException('labels.%s: expected a list of names' % key)
            if labels.get('agents') is not None and len(labels['agents']) != n:
                raise nashwelfare.exceptions.InvalidInstanceException('labels.agents: expected %d names' % n)
            if labels.get('items') is not None and len(labels['items']) != m:
                raise nashwelfare.exceptions.InvalidInstanceException('labels.items: expected %d names' % m)
        metadata = data.get('metadata')
        if metadata is not None and not isinstance(metadata, dict):
            raise nashwelfare.exceptions.InvalidInstanceException('metadata: expected an object')
        return cls(oracles, labels=labels, metadata=metadata)

    def __eq__(self, other):
        return isinstance(other, Instance) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return '<Instance with %d agents and %d items>' % (self.n, self.m)
