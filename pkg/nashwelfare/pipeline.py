"""
The allocation pipeline: initial matching, continuous greedy on the
remaining items, independent rounding trials each completed by a final
matching, and the verification commands built around it.
"""

import os
import math
import time
import logging

import numpy

import nashwelfare
import nashwelfare.exceptions
import nashwelfare.instancefile
import nashwelfare.matching
import nashwelfare.multilinear
import nashwelfare.recombination
import nashwelfare.reference
import nashwelfare.relaxation
import nashwelfare.rounding
import nashwelfare.threads


APPROXIMATION_FACTOR = 380.0
DEFAULT_TRIALS = 16
DEFAULT_SMALL_ITEMS_SEEDS = 500
# A later trial replaces the best one only when it is better by more than this,
# relative to the magnitude of the best log NSW.
TIE_TOLERANCE = 1e-9


class PipelineConfig(object):
    def __init__(self, greedy=None, c=nashwelfare.rounding.DEFAULT_C, trials=DEFAULT_TRIALS, seed=0, d=None,
                 worker_threads=1, assign_leftovers=False,
                 brute_force_limit=nashwelfare.reference.BRUTE_FORCE_LIMIT,
                 small_items_seeds=DEFAULT_SMALL_ITEMS_SEEDS):
        self.greedy = greedy or nashwelfare.relaxation.GreedyConfig()
        self.c = float(c)
        self.trials = int(trials)
        self.seed = int(seed)
        self.d = float(d) if d is not None else self.c + 2.0
        self.worker_threads = int(worker_threads)
        self.assign_leftovers = bool(assign_leftovers)
        self.brute_force_limit = int(brute_force_limit)
        self.small_items_seeds = int(small_items_seeds)
        self.validate()

    def validate(self):
        if not self.c > 0:
            raise nashwelfare.exceptions.InvalidInstanceException('c must be positive, got %s' % self.c)
        if self.trials < 1:
            raise nashwelfare.exceptions.InvalidInstanceException('trials must be at least 1, got %s' % self.trials)
        if self.d < 2:
            raise nashwelfare.exceptions.InvalidInstanceException('d must be at least 2, got %s' % self.d)
        if self.worker_threads < 1:
            raise nashwelfare.exceptions.InvalidInstanceException('worker_threads must be at least 1')
        self.greedy.validate()

    def with_seed(self, seed):
        return PipelineConfig(self.greedy, self.c, self.trials, seed, self.d, self.worker_threads,
                              self.assign_leftovers, self.brute_force_limit, self.small_items_seeds)

    def to_dict(self):
        return {
            'greedy': self.greedy.to_dict(),
            'c': self.c,
            'trials': self.trials,
            'seed': self.seed,
            'd': self.d,
            'assign_leftovers': self.assign_leftovers,
        }


class TrialRecord(object):
    def __init__(self, index, outcome, sigma, allocation, log_nsw, discarded):
        self.index = index
        self.outcome = outcome
        self.sigma = sigma
        self.allocation = allocation
        self.log_nsw = log_nsw
        self.discarded = discarded

    def to_dict(self):
        return {
            'trial': self.index,
            'Z': [int(z) for z in self.outcome.Z],
            'R': self.outcome.bundles,
            'sigma': self.sigma.to_list(),
            'allocation': self.allocation,
            'discarded': self.discarded,
            'log_nsw': nashwelfare.encode_log(self.log_nsw),
        }


class RunReport(object):
    """
    Everything a pipeline run produced, in the order the phases ran. Fields
    of phases that did not run stay None.
    """

    def __init__(self, instance, config):
        self.instance = instance
        self.config = config
        self.tau = None
        self.H = None
        self.A_prime = None
        self.G_prime = None
        self.opt_zero = None
        self.greedy_trace = None
        self.y = None
        self.trials = []
        self.best = None
        self.exact = None
        self.exact_result = None
        self.certificates = {}
        self.started = nashwelfare.utc_now()
        self.finished = None
        self.seconds = None

    def finish(self, started_clock):
        self.finished = nashwelfare.utc_now()
        self.seconds = time.perf_counter() - started_clock

    @property
    def log_nsw(self):
        return self.best['log_nsw'] if self.best else nashwelfare.LOG_ZERO

    def to_dict(self, timing=True):
        data = {
            'instance_meta': {
                'n': self.instance.n,
                'm': self.instance.m,
                'metadata': self.instance.metadata,
                'families': [o.family for o in self.instance.oracles],
            },
            'config': self.config.to_dict(),
            'tau': self.tau.to_list() if self.tau is not None else None,
            'H': self.H,
            'A_prime': self.A_prime,
            'opt_zero': self.opt_zero,
            'greedy_trace': self.greedy_trace.to_dict() if self.greedy_trace is not None else None,
            'fractional': self.y.to_list() if self.y is not None else None,
            'trials': [trial.to_dict() for trial in self.trials],
            'best': None,
        }
        if self.best is not None:
            data['best'] = {
                'allocation': self.best['allocation'],
                'log_nsw': nashwelfare.encode_log(self.best['log_nsw']),
                'trial': self.best['trial'],
                'discarded': self.best['discarded'],
                'opt_zero': bool(self.opt_zero),
            }
        if self.exact is not None:
            data['exact'] = self.exact
        if self.certificates:
            data['certificates'] = self.certificates
        if timing:
            data['timing'] = {
                'started': self.started.isoformat(),
                'finished': self.finished.isoformat() if self.finished else None,
                'seconds': self.seconds,
            }
        return data


def assign_leftovers(instance, allocation, items):
    """
    Give every discarded item, lowest first, to the agent whose value grows by
    the largest factor, lowest agent first on ties. Values never decrease.
    """
    allocation = [list(bundle) for bundle in allocation]
    for j in sorted(items):
        best_agent = None
        best_gain = None
        for i, oracle in enumerate(instance.oracles):
            before = oracle.value(allocation[i])
            after = oracle.value(allocation[i] + [j])
            if before > 0:
                gain = math.log(after / before)
            else:
                gain = math.inf if after > 0 else 0.0
            if best_gain is None or gain > best_gain:
                best_agent, best_gain = i, gain
        allocation[best_agent].append(j)
    return [sorted(bundle) for bundle in allocation]


def _best_effort(instance, report):
    allocation = [[] if j is None else [j] for j in report.tau.assignment]
    log_nsw = nashwelfare.reference.nsw_value(instance, allocation, allow_unassigned=True)
    assigned = set(j for bundle in allocation for j in bundle)
    report.best = {
        'allocation': allocation,
        'log_nsw': log_nsw,
        'trial': None,
        'discarded': [j for j in range(instance.m) if j not in assigned],
    }


def run_trial(instance, y, H, G_prime, config, index):
    """
    Round y with the trial's stream, complete the rounding with the final
    matching and score the allocation.
    """
    rng = nashwelfare.spawn_rng(config.seed, nashwelfare.STREAM_ROUNDING, index)
    outcome = nashwelfare.rounding.randomized_rounding(y, rng)
    bundles = outcome.bundles
    sigma = nashwelfare.matching.final_matching(instance, bundles, H)
    allocation = [sorted(bundles[i] + ([] if sigma[i] is None else [sigma[i]])) for i in range(instance.n)]
    discarded = outcome.unassigned(G_prime)
    if config.assign_leftovers and discarded:
        matched = set(sigma.items())
        unmatched_H = [h for h in H if h not in matched]
        allocation = assign_leftovers(instance, allocation, discarded + unmatched_H)
        discarded = []
    log_nsw = nashwelfare.reference.nsw_value(instance, allocation, allow_unassigned=True)
    logging.debug('Trial %d: log NSW %s' % (index, log_nsw))
    return TrialRecord(index, outcome, sigma, allocation, log_nsw, discarded)


def _better(log_nsw, best):
    if best == -math.inf:
        return log_nsw > best
    return log_nsw > best + TIE_TOLERANCE * max(1.0, abs(best))


def run_pipeline(instance, config, pool=None):
    """
    Run the whole algorithm on 'instance' and return the RunReport. Errors
    raised by any phase carry the partial report.
    """
    clock = time.perf_counter()
    report = RunReport(instance, config)
    pool = pool or nashwelfare.threads.WorkerPool(config.worker_threads)
    try:
        tau, H, opt_zero = nashwelfare.matching.initial_matching(instance)
        report.tau, report.H, report.opt_zero = tau, H, opt_zero
        if opt_zero:
            logging.warning('No allocation has positive Nash social welfare; returning the initial matching')
            _best_effort(instance, report)
            report.finish(clock)
            return report

        G_prime = nashwelfare.relaxation.remaining_items(instance, H)
        A_prime = nashwelfare.relaxation.active_agents(instance, H)
        report.A_prime, report.G_prime = A_prime, G_prime
        y, trace = nashwelfare.relaxation.iterated_continuous_greedy(
            instance, A_prime, G_prime, config.greedy, config.seed,
        )
        report.y, report.greedy_trace = y, trace

        trials = pool.map(lambda index: run_trial(instance, y, H, G_prime, config, index), range(config.trials))
        report.trials = trials
        best = trials[0]
        for trial in trials[1:]:
            if _better(trial.log_nsw, best.log_nsw):
                best = trial
        report.best = {
            'allocation': best.allocation,
            'log_nsw': best.log_nsw,
            'trial': best.index,
            'discarded': best.discarded,
        }
        logging.info('Best of %d trials is trial %d with log NSW %s' % (len(trials), best.index, best.log_nsw))
    except nashwelfare.exceptions.NashWelfareException as e:
        e.report = report
        raise
    report.finish(clock)
    return report


def _ratio(log_alg, log_opt):
    if log_opt == -math.inf:
        return None
    if log_alg == -math.inf:
        return 0.0
    return math.exp(log_alg - log_opt)


def exact_comparison(report, exact):
    """
    Compare a run against the exact optimum: the ratio ALG/OPT and whether
    ALG >= OPT/380.
    """
    log_alg = report.log_nsw
    passes = exact.log_nsw == -math.inf or log_alg >= exact.log_nsw - math.log(APPROXIMATION_FACTOR) - 1e-9
    return {
        'opt_log_nsw': nashwelfare.encode_log(exact.log_nsw),
        'opt_allocation': exact.allocation,
        'ratio': _ratio(log_alg, exact.log_nsw),
        'passes': passes,
    }


def greedy_certificate_report(report, exact):
    if report.opt_zero or report.y is None:
        return None
    value = nashwelfare.relaxation.greedy_certificate(
        report.instance, report.A_prime, report.G_prime, report.y, exact.allocation,
    )
    n = report.instance.n
    return {
        'value': value if math.isfinite(value) else None,
        'bound': math.e,
        'holds': value <= math.e + 1e-6,
        'iterations': report.greedy_trace.count,
        'iteration_bound': int(math.ceil(8 * math.log(n))) + 2,
    }


def compare_command(instance, config, pool=None):
    """
    Run the pipeline and, when the instance is small enough, the brute force;
    return the report with the exact comparison and the greedy certificate.
    """
    report = run_pipeline(instance, config, pool)
    try:
        exact = nashwelfare.reference.brute_force_nsw(instance, config.brute_force_limit)
    except nashwelfare.exceptions.SizeLimitException as e:
        logging.warning('Exact optimum unavailable: %s' % e)
        report.exact = {'available': False}
        return report
    report.exact_result = exact
    report.exact = exact_comparison(report, exact)
    report.exact['available'] = True
    certificate = greedy_certificate_report(report, exact)
    if certificate is not None:
        report.certificates['greedy'] = certificate
    return report


def check_command(instance, config, pool=None):
    """
    Run the pipeline and the diagnostics behind the approximation factor:
    the large-set postconditions, the small-items success rate, the
    recombination certificate and the matching extension bound.
    """
    report = compare_command(instance, config, pool)
    if report.opt_zero:
        report.certificates['note'] = 'optimum is 0; diagnostics skipped'
        return report
    exact = report.exact_result

    A_prime, G_prime = report.A_prime, report.G_prime
    padded_instance, padded_y = nashwelfare.rounding.pad_with_dummies(instance, report.y, config.c, A_prime)
    candidates = G_prime + list(range(instance.m, padded_instance.m))
    large = []
    for i in A_prime:
        L = nashwelfare.rounding.find_large_set(padded_instance, i, padded_y.y[i], config.c, candidates)
        large.append(nashwelfare.rounding.large_set_report(padded_instance, i, padded_y.y[i], L, config.c,
                                                           candidates))
    report.certificates['large_sets'] = large

    if exact is not None:
        report.certificates['small_items'] = nashwelfare.rounding.small_items_success_rate(
            instance, report.y, A_prime, G_prime, exact.allocation, config.c, config.small_items_seeds,
            seed=config.seed,
        )

    best = report.trials[report.best['trial']]
    pi = best.sigma
    rho, decomposition = nashwelfare.recombination.recombine(instance, report.tau, pi, report.y, config.d)
    certificate = nashwelfare.recombination.verify_recombination(
        instance, report.tau, pi, rho, report.y, config.d, decomposition,
    )
    report.certificates['recombination'] = {
        'pi': pi.to_list(),
        'rho': rho.to_list(),
        'decomposition': decomposition.to_dict(),
        'certificate': certificate.to_dict(),
    }

    if exact is not None:
        report.certificates['matching_extension'] = nashwelfare.recombination.matching_extension_bound(
            instance, report.y, report.H, exact.allocation, exact.log_nsw, A_prime,
        )
    return report


def exact_command(instance, limit=nashwelfare.reference.BRUTE_FORCE_LIMIT, path=None):
    """
    Brute-force the optimum; with 'path', also write it next to that
    instance file.
    """
    result = nashwelfare.reference.brute_force_nsw(instance, limit)
    data = result.to_dict()
    if path is not None:
        target = os.path.splitext(path)[0] + '.exact.json'
        nashwelfare.instancefile.save_json(data, target)
        logging.info('Exact result written to %s' % target)
    return data


def bench_command(cases, config, seeds, pool=None):
    """
    Run the pipeline on every golden case with every seed and summarize the
    ratios to the exact optimum.
    """
    clock = time.perf_counter()
    pool = pool or nashwelfare.threads.WorkerPool(config.worker_threads)
    tasks = [(case, seed) for case in cases for seed in seeds]
    inline = nashwelfare.threads.WorkerPool(1)

    def run(task):
        case, seed = task
        report = run_pipeline(case.instance, config.with_seed(seed), inline)
        return case.name, seed, _ratio(report.log_nsw, case.exact.log_nsw), report

    results = pool.map(run, tasks)
    ratios = [ratio for _, _, ratio, _ in results if ratio is not None]
    failures = [{'case': name, 'seed': seed, 'ratio': ratio} for name, seed, ratio, _ in results
                if ratio is not None and ratio < 1.0 / APPROXIMATION_FACTOR - 1e-12]
    worst = min(ratios) if ratios else None
    logging.info('Bench over %d runs: worst ratio %s, %d failures' % (len(results), worst, len(failures)))
    return {
        'runs': len(results),
        'cases': len(cases),
        'seeds': list(seeds),
        'worst_ratio': worst,
        'mean_ratio': float(numpy.mean(ratios)) if ratios else None,
        'failures': failures,
        'seconds': time.perf_counter() - clock,
    }
