"""
The iterated continuous greedy for the log-multilinear relaxation over the
items G' left after the initial matching and the agents A' that value them.

Each pass halves the current solution and then follows, in steps of size
delta over t in [1/2, 1), the direction maximizing the sum over agents of
(dV_i/dy_ij) / V_i(y_i). Passes repeat while the per-agent average log gain
reaches the gain threshold.
"""

import math
import logging

import numpy

import nashwelfare
import nashwelfare.exceptions
import nashwelfare.multilinear


DEFAULT_GAIN_THRESHOLD = 0.125
DEFAULT_MAX_ITERATIONS = 64
DEFAULT_EXACT_SUPPORT_LIMIT = 16
ESTIMATORS = ('exact', 'sample')
# Standard errors subtracted from a sampled gain before it is compared with
# the threshold.
NOISE_MARGIN = 3.0
DIRECTION_TOLERANCE = 1e-9


class GreedyConfig(object):
    """
    Parameters of the iterated continuous greedy. A delta or sample count of
    None is derived from the instance size by resolve().
    """

    def __init__(self, delta=None, samples=None, gain_threshold=DEFAULT_GAIN_THRESHOLD,
                 max_iterations=DEFAULT_MAX_ITERATIONS, estimator='exact',
                 exact_support_limit=DEFAULT_EXACT_SUPPORT_LIMIT):
        self.delta = delta
        self.samples = samples
        self.gain_threshold = gain_threshold
        self.max_iterations = max_iterations
        self.estimator = estimator
        self.exact_support_limit = exact_support_limit
        self.validate()

    def validate(self):
        if self.delta is not None and not 0 < self.delta <= 0.5:
            raise nashwelfare.exceptions.InvalidInstanceException('delta must lie in (0, 1/2], got %s' % self.delta)
        if self.delta is not None:
            self.steps(self.delta)
        if self.samples is not None and self.samples < 1:
            raise nashwelfare.exceptions.InvalidInstanceException('samples must be at least 1, got %s' % self.samples)
        if not self.gain_threshold > 0:
            raise nashwelfare.exceptions.InvalidInstanceException(
                'gain_threshold must be positive, got %s' % self.gain_threshold
            )
        if self.max_iterations < 1:
            raise nashwelfare.exceptions.InvalidInstanceException(
                'max_iterations must be at least 1, got %s' % self.max_iterations
            )
        if self.estimator not in ESTIMATORS:
            raise nashwelfare.exceptions.InvalidInstanceException(
                "estimator must be one of %s, got '%s'" % (', '.join(ESTIMATORS), self.estimator)
            )

    @staticmethod
    def steps(delta):
        """
        Return the number of steps of size delta covering [1/2, 1].
        """
        steps = int(round(0.5 / delta))
        if steps < 1 or abs(steps * delta - 0.5) > 1e-9:
            raise nashwelfare.exceptions.InvalidInstanceException(
                'delta must divide 1/2 into an integer number of steps, got %s' % delta
            )
        return steps

    def resolve(self, n, m):
        """
        Return (delta, steps, samples) for an instance with n agents and m items.
        """
        delta = self.delta
        if delta is None:
            delta = 1.0 / (4 * max(m, 1))
        samples = self.samples
        if samples is None:
            samples = int(math.ceil(50 * (m + n) * math.log(m * n + 1)))
        return delta, self.steps(delta), max(int(samples), 1)

    def to_dict(self):
        return {
            'delta': self.delta,
            'samples': self.samples,
            'gain_threshold': self.gain_threshold,
            'max_iterations': self.max_iterations,
            'estimator': self.estimator,
            'exact_support_limit': self.exact_support_limit,
        }


class GreedyTrace(object):
    """
    Record of a greedy run: the objective after every pass and the direction
    chosen at every step, as one agent index (or -1) per item of G'.
    """

    def __init__(self, agents=(), items=()):
        self.agents = list(agents)
        self.items = list(items)
        self.initial_objective = None
        self.iterations = []
        self.directions = []
        self.sampled_agents = []

    @property
    def count(self):
        return len(self.iterations)

    def add_iteration(self, objective, gain, std_error=0.0):
        self.iterations.append({
            'iteration': len(self.iterations) + 1,
            'objective': objective,
            'gain': gain,
            'std_error': std_error,
        })

    def to_dict(self):
        return {
            'agents': self.agents,
            'items': self.items,
            'initial_objective': nashwelfare.encode_log(self.initial_objective),
            'iterations': [
                {
                    'iteration': record['iteration'],
                    'objective': nashwelfare.encode_log(record['objective']),
                    'gain': nashwelfare.encode_log(record['gain']),
                    'std_error': record['std_error'],
                } for record in self.iterations
            ],
            'directions': self.directions,
            'sampled_agents': self.sampled_agents,
            'count': self.count,
        }


def active_agents(instance, H):
    """
    Return the agents with positive value for the items outside H.
    """
    H = set(H)
    rest = [j for j in range(instance.m) if j not in H]
    return [i for i, oracle in enumerate(instance.oracles) if oracle.value(rest) > 0]


def remaining_items(instance, H):
    H = set(H)
    return [j for j in range(instance.m) if j not in H]


def greedy_direction(weights, values):
    """
    Solve max sum_i (1/V_i) sum_j w_ij z_ij over z >= 0 with column sums at
    most 1. The problem separates per item: each item goes wholly to the
    agent with the largest ratio w_ij / V_i, lowest agent first on ties, and
    to nobody if that ratio is 0.
    """
    weights = numpy.asarray(weights, dtype=float)
    values = numpy.asarray(values, dtype=float)
    if (values <= 0).any():
        i = int(numpy.flatnonzero(values <= 0)[0])
        raise nashwelfare.exceptions.EstimatorCollapseException(
            'Agent at row %d has non-positive value %g in the fractional solution' % (i, values[i])
        )
    z = numpy.zeros_like(weights)
    if weights.size == 0:
        return z
    ratios = weights / values[:, None]
    best = ratios.max(axis=0)
    winners = numpy.argmax(ratios >= best[None, :] - DIRECTION_TOLERANCE * numpy.abs(best[None, :]), axis=0)
    columns = numpy.flatnonzero(best > 0)
    z[winners[columns], columns] = 1.0
    return z


def _direction(weights, values, empty):
    """
    greedy_direction with agents holding nothing served first: their ratio is
    unbounded, so each item valued by one of them goes to the one with the
    largest weight, and the remaining items are shared among the others.
    """
    if not empty.any():
        return greedy_direction(weights, values)
    z = numpy.zeros_like(weights)
    z[empty] = greedy_direction(weights[empty], numpy.ones(int(empty.sum())))
    free = ~z.any(axis=0)
    if (~empty).any() and free.any():
        z[numpy.ix_(~empty, free)] = greedy_direction(weights[~empty][:, free], values[~empty])
    return z


class _Evaluator(object):
    """
    Chooses per agent between exact evaluation and sampling, and evaluates
    values and gradients with streams keyed by (seed, pass, step, agent).
    """

    def __init__(self, instance, agents, items, config, seed):
        self.instance = instance
        self.agents = list(agents)
        self.items = list(items)
        self.seed = seed
        self.delta, self.steps, self.samples = config.resolve(instance.n, instance.m)
        self.exact = {}
        for i in self.agents:
            oracle = instance.oracles[i]
            exact = config.estimator == 'exact' and (
                oracle.closed_form or len(self.items) <= config.exact_support_limit
            )
            if config.estimator == 'exact' and not exact:
                logging.warning('Agent %d has no exact evaluator on %d items; sampling with %d samples'
                                % (i, len(self.items), self.samples))
            self.exact[i] = exact
        self.sampled_agents = [i for i in self.agents if not self.exact[i]]

    def mode(self, tag, agent, *path):
        if self.exact[agent]:
            return nashwelfare.multilinear.EXACT
        rng = nashwelfare.spawn_rng(self.seed, tag, *(list(path) + [agent]))
        return nashwelfare.multilinear.SampledMode(self.samples, rng)

    def value(self, y, agent, *path):
        """
        Return (V_i(y_i), standard error).
        """
        oracle = self.instance.oracles[agent]
        mode = self.mode(nashwelfare.STREAM_OBJECTIVE, agent, *path)
        if mode == nashwelfare.multilinear.EXACT:
            return nashwelfare.multilinear.eval_exact(oracle, y[agent]), 0.0
        estimate = nashwelfare.multilinear.eval_sample(oracle, y[agent], mode.count, mode.rng)
        return estimate.mean, estimate.std_error

    def gradient(self, y, agent, *path):
        oracle = self.instance.oracles[agent]
        mode = self.mode(nashwelfare.STREAM_GRADIENT, agent, *path)
        means, _ = nashwelfare.multilinear.gradient(oracle, y[agent], self.items, mode)
        return means

    def objective(self, y, *path):
        """
        Return (1/n) sum over A' of log V_i(y_i) and its standard error.
        """
        logs = []
        variance = 0.0
        for i in self.agents:
            value, error = self.value(y, i, *path)
            logs.append(nashwelfare.safe_log(value))
            if value > 0:
                variance += (error / value) ** 2
        n = self.instance.n
        return math.fsum(logs) / n, math.sqrt(variance) / n


def _collapse_thresholds(instance, agents, items, delta, started_empty):
    """
    Per agent, its smallest positive singleton value on the items over (mn)^2.
    Agents that entered the pass with nothing get delta times that: one step
    of size delta already lifts V_i above it.
    """
    singles = instance.singleton_values()
    scale = float(instance.m * instance.n) ** 2
    thresholds = {}
    for r, i in enumerate(agents):
        row = singles[i, items] if items else numpy.zeros(0)
        positive = row[row > 0]
        threshold = float(positive.min()) / scale if len(positive) else 0.0
        thresholds[i] = threshold * delta if started_empty[r] else threshold
    return thresholds


def continuous_greedy_pass(instance, agents, items, y_start, config, seed, pass_index=0, trace=None,
                           evaluator=None):
    """
    Run one continuous greedy pass from y(1/2) = y_start / 2 to y(1) and
    return y(1) as a FractionalAllocation.
    """
    evaluator = evaluator or _Evaluator(instance, agents, items, config, seed)
    y = numpy.array(y_start.y if isinstance(y_start, nashwelfare.multilinear.FractionalAllocation) else y_start,
                    dtype=float) / 2.0
    if not agents or not items:
        return nashwelfare.multilinear.FractionalAllocation(y)
    rows = numpy.asarray(agents)
    thresholds = _collapse_thresholds(instance, agents, items, evaluator.delta, ~y[rows].any(axis=1))
    columns = numpy.asarray(items)
    directions = []

    for step in range(evaluator.steps):
        values = numpy.zeros(len(agents))
        weights = numpy.zeros((len(agents), len(items)))
        # An empty row is worth exactly 0 and is not a collapse.
        empty = ~y[rows].any(axis=1)
        for r, i in enumerate(agents):
            values[r], _ = evaluator.value(y, i, pass_index, step)
            if not empty[r] and values[r] < thresholds[i]:
                raise nashwelfare.exceptions.EstimatorCollapseException(
                    'Value of agent %d fell to %g, below the collapse threshold %g' % (i, values[r], thresholds[i])
                )
            weights[r] = evaluator.gradient(y, i, pass_index, step)
        z = _direction(weights, values, empty)
        y[numpy.ix_(rows, columns)] += evaluator.delta * z
        chosen = numpy.where(z.any(axis=0), rows[numpy.argmax(z, axis=0)], -1)
        directions.append([int(a) for a in chosen])
        logging.debug('Pass %d step %d: direction %s' % (pass_index, step, directions[-1]))

    if trace is not None:
        trace.directions.append(directions)
    return nashwelfare.multilinear.FractionalAllocation(numpy.minimum(y, 1.0))


def iterated_continuous_greedy(instance, agents, items, config, seed):
    """
    Start from y_ij = 1/n on A' x G' and run continuous greedy passes while
    the per-agent average log gain reaches the threshold. Return the output
    of the last pass and the trace.
    """
    n, m = instance.n, instance.m
    trace = GreedyTrace(agents, items)
    if not agents:
        return nashwelfare.multilinear.FractionalAllocation.zeros(n, m), trace

    evaluator = _Evaluator(instance, agents, items, config, seed)
    trace.sampled_agents = list(evaluator.sampled_agents)
    y = numpy.zeros((n, m), dtype=float)
    y[numpy.ix_(agents, items)] = 1.0 / n
    previous, previous_error = evaluator.objective(y, 0)
    trace.initial_objective = previous
    logging.info('Continuous greedy on %d agents and %d items, delta %g, initial objective %.6f'
                 % (len(agents), len(items), evaluator.delta, previous))

    for iteration in range(1, config.max_iterations + 1):
        current = continuous_greedy_pass(instance, agents, items, y, config, seed, pass_index=iteration,
                                         trace=trace, evaluator=evaluator)
        objective, error = evaluator.objective(current.y, iteration)
        gain = objective - previous
        margin = NOISE_MARGIN * math.sqrt(error ** 2 + previous_error ** 2)
        trace.add_iteration(objective, gain, margin / NOISE_MARGIN)
        logging.info('Greedy pass %d: objective %.6f, gain %.6f' % (iteration, objective, gain))
        if gain - margin < config.gain_threshold:
            return current, trace
        y = current.y
        previous, previous_error = objective, error

    raise nashwelfare.exceptions.IterationLimitException(
        'Continuous greedy still gaining after %d passes' % config.max_iterations,
        trace=trace,
    )


def objective(instance, agents, y):
    """
    Return (1/n) sum over 'agents' of log V_i(y_i), evaluated exactly.
    """
    y = y.y if isinstance(y, nashwelfare.multilinear.FractionalAllocation) else numpy.asarray(y)
    logs = [nashwelfare.safe_log(nashwelfare.multilinear.eval_exact(instance.oracles[i], y[i])) for i in agents]
    return math.fsum(logs) / instance.n


def sampled_objective(instance, agents, y, samples, seed, *path):
    """
    Monte Carlo twin of objective(); returns the estimate and its standard
    error.
    """
    config = GreedyConfig(samples=samples, estimator='sample')
    evaluator = _Evaluator(instance, agents, [], config, seed)
    y = y.y if isinstance(y, nashwelfare.multilinear.FractionalAllocation) else numpy.asarray(y)
    return evaluator.objective(y, *path)


def reference_point(instance, bundles, items):
    """
    Return the indicator matrix of 'bundles' restricted to 'items'.
    """
    items = set(items)
    y = numpy.zeros((instance.n, instance.m), dtype=float)
    for i, bundle in enumerate(bundles):
        for j in bundle:
            if j in items:
                y[i, j] = 1.0
    return y


def greedy_certificate(instance, agents, items, y, bundles):
    """
    Return (1/n) sum over A' of V_i(y*_i) / V_i(y_i), with y* the indicator of
    a reference allocation restricted to G'. The greedy guarantees at most e.
    """
    y = y.y if isinstance(y, nashwelfare.multilinear.FractionalAllocation) else numpy.asarray(y)
    star = reference_point(instance, bundles, items)
    total = []
    for i in agents:
        oracle = instance.oracles[i]
        reference = nashwelfare.multilinear.eval_exact(oracle, star[i])
        value = nashwelfare.multilinear.eval_exact(oracle, y[i])
        if value <= 0:
            total.append(0.0 if reference <= 0 else math.inf)
        else:
            total.append(reference / value)
    return math.fsum(total) / instance.n
