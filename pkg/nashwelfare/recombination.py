"""
Diagnostics for matchings on top of a fractional solution y.

recombine() combines the initial matching tau with any matching pi into H
along the alternating paths and cycles of their symmetric difference, and
verify_recombination() checks the resulting matching rho. The matching
extension bound compares NSW(y', pi) against a known integral optimum. None
of this runs in the solve pipeline.
"""

import math
import logging

import numpy

import nashwelfare
import nashwelfare.exceptions
import nashwelfare.matching
import nashwelfare.multilinear


TOLERANCE = 1e-9


def _matrix(y):
    if isinstance(y, nashwelfare.multilinear.FractionalAllocation):
        return y.y
    return numpy.asarray(y, dtype=float)


class _Values(object):
    """
    Cache of V_a(y_a + 1_h) keyed by (agent, item or None).
    """

    def __init__(self, instance, y):
        self.instance = instance
        self.y = _matrix(y)
        self.cache = {}

    def __call__(self, agent, item=None):
        key = (agent, item)
        if key not in self.cache:
            extra = [] if item is None else [item]
            point = nashwelfare.multilinear.overlay(self.y[agent], extra)
            self.cache[key] = nashwelfare.multilinear.eval_exact(self.instance.oracles[agent], point)
        return self.cache[key]

    def log(self, agent, item=None):
        return nashwelfare.safe_log(self(agent, item))


def recombination_nsw(instance, y, matching):
    """
    Return log NSW(y, pi) = (1/n) sum over agents of log V_a(y_a + 1_pi(a)).
    """
    return _log_nsw(_Values(instance, y), instance.n, matching.assignment)


def _log_nsw(values, n, assignment):
    return math.fsum(values.log(a, assignment[a]) for a in range(n)) / n


class AlternatingDecomposition(object):
    """
    The symmetric difference of pi and tau split into components, the set B
    of agents whose pi item is worth less than V_a(y_a) / (d - 1), and every
    path cut at B with its classification.
    """

    def __init__(self, d):
        self.d = d
        self.B = []
        self.components = []
        self.paths = []
        self.pi_prime = []

    def favorable(self, kind):
        return [path for path in self.paths if path['kind'] == kind]

    def to_dict(self):
        return {
            'd': self.d,
            'B': self.B,
            'components': self.components,
            'paths': [
                {
                    'agents': path['agents'],
                    'items': path['items'],
                    'log_phi': nashwelfare.encode_log(path['log_phi']),
                    'kind': path['kind'],
                } for path in self.paths
            ],
            'pi_prime': self.pi_prime,
        }


def _components(tau, pi, differing):
    """
    Group the agents with pi(a) != tau(a) into the connected components of
    the symmetric difference, each component listed in ascending agent order.
    """
    by_item = {}
    for a in differing:
        for item in (tau[a], pi[a]):
            if item is not None:
                by_item.setdefault(item, []).append(a)
    seen = set()
    components = []
    for start in differing:
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        component = []
        while stack:
            a = stack.pop()
            component.append(a)
            for item in (tau[a], pi[a]):
                for b in by_item.get(item, []):
                    if b not in seen:
                        seen.add(b)
                        stack.append(b)
        components.append(sorted(component))
    return components


def recombine(instance, tau, pi, y, d):
    """
    Build the matching rho from tau and pi: agents where they agree keep
    their item; components of the symmetric difference without a B agent
    take pi; every other component is cut into paths a_1, ..., a_k headed
    by an agent with no pi' item, and each path takes tau if
    phi(a_1, ..., a_k) <= d^k and pi' otherwise.
    """
    if d < 2:
        raise nashwelfare.exceptions.InvalidInstanceException('d must be at least 2, got %s' % d)
    n = instance.n
    H = tau.items()
    pi.check_pool(H)
    values = _Values(instance, y)
    singles = instance.singleton_values()
    decomposition = AlternatingDecomposition(d)

    B = [a for a in range(n)
         if pi[a] is not None and singles[a, pi[a]] < values(a) / (d - 1)]
    B_set = set(B)
    decomposition.B = B

    differing = [a for a in range(n) if pi[a] != tau[a]]
    heads = set(a for a in differing if a in B_set or pi[a] is None)
    decomposition.pi_prime = [None if a in heads else pi[a] for a in range(n)]
    decomposition.components = _components(tau, pi, differing)

    rho = [tau[a] if pi[a] == tau[a] else None for a in range(n)]
    owner = dict((pi[a], a) for a in differing if pi[a] is not None and a not in heads)
    log_d = math.log(d)

    for component in decomposition.components:
        if not any(a in heads for a in component):
            for a in component:
                rho[a] = pi[a]
            continue
        for head in component:
            if head not in heads:
                continue
            agents = [head]
            items = [tau[head]]
            log_phi = values.log(head) - values.log(head, tau[head])
            while items[-1] is not None and items[-1] in owner:
                a = owner[items[-1]]
                log_phi += values.log(a, items[-1]) - values.log(a, tau[a])
                agents.append(a)
                items.append(tau[a])
            k = len(agents)
            kind = 'tau' if log_phi <= k * log_d else 'pi'
            if kind == 'tau':
                for a in agents:
                    rho[a] = tau[a]
            else:
                rho[head] = None
                for a in agents[1:]:
                    rho[a] = pi[a]
            decomposition.paths.append({'agents': agents, 'items': items, 'log_phi': log_phi, 'kind': kind})

    covered = set(a for path in decomposition.paths for a in path['agents'])
    for component in decomposition.components:
        if any(a in heads for a in component) and not set(component) <= covered:
            raise nashwelfare.exceptions.InvariantViolationException(
                'Alternating paths do not cover component %s' % component
            )
    logging.debug('Recombination: B = %s, %d paths' % (B, len(decomposition.paths)))
    return nashwelfare.matching.Matching(rho), decomposition


class RecombinationCertificate(object):
    def __init__(self):
        self.nsw_ratio_ok = True
        self.per_agent_case = []
        self.violations = []
        self.log_nsw_rho = None
        self.log_nsw_pi = None
        self.log_nsw_pi_prime = None
        self.pi_prime_ok = True
        self.identity_error = None

    @property
    def ok(self):
        return self.nsw_ratio_ok and self.pi_prime_ok and not self.violations

    def to_dict(self):
        return {
            'ok': self.ok,
            'nsw_ratio_ok': self.nsw_ratio_ok,
            'pi_prime_ok': self.pi_prime_ok,
            'per_agent_case': self.per_agent_case,
            'violations': self.violations,
            'log_nsw_rho': nashwelfare.encode_log(self.log_nsw_rho),
            'log_nsw_pi': nashwelfare.encode_log(self.log_nsw_pi),
            'log_nsw_pi_prime': nashwelfare.encode_log(self.log_nsw_pi_prime),
            'identity_error': self.identity_error,
        }


def verify_recombination(instance, tau, pi, rho, y, d, decomposition=None):
    """
    Check NSW(y, rho) >= NSW(y, pi) / (d + 2), and for every agent either (i)
    v_a(rho(a)) >= V_a(y_a) / d or (ii) v_a(j) < V_a(y_a) / d for all j in G'.
    With a decomposition, also check NSW(y, pi') >= (d - 1)/d NSW(y, pi) and
    the identity NSW(y, rho) / NSW(y, pi') = (product of phi over tau paths)^(-1/n).
    """
    n = instance.n
    values = _Values(instance, y)
    singles = instance.singleton_values()
    H = set(tau.items())
    rest = [j for j in range(instance.m) if j not in H]
    certificate = RecombinationCertificate()

    certificate.log_nsw_rho = _log_nsw(values, n, rho.assignment)
    certificate.log_nsw_pi = _log_nsw(values, n, pi.assignment)
    if certificate.log_nsw_pi > -math.inf:
        certificate.nsw_ratio_ok = (
            certificate.log_nsw_rho >= certificate.log_nsw_pi - math.log(d + 2) - TOLERANCE
        )

    for a in range(n):
        share = values(a) / d
        slack = TOLERANCE * max(1.0, share)
        item = rho[a]
        if item is not None and singles[a, item] >= share - slack:
            certificate.per_agent_case.append('(i)')
            continue
        best = max(rest, key=lambda j: singles[a, j]) if rest else None
        if best is None or singles[a, best] < share + slack:
            certificate.per_agent_case.append('(ii)')
            continue
        certificate.per_agent_case.append('violation')
        certificate.violations.append({'agent': a, 'item': int(best), 'value': float(singles[a, best]),
                                       'threshold': share})

    if decomposition is not None:
        certificate.log_nsw_pi_prime = _log_nsw(values, n, decomposition.pi_prime)
        if certificate.log_nsw_pi > -math.inf:
            certificate.pi_prime_ok = (
                certificate.log_nsw_pi_prime >= certificate.log_nsw_pi + math.log((d - 1.0) / d) - TOLERANCE
            )
        if math.isfinite(certificate.log_nsw_rho) and math.isfinite(certificate.log_nsw_pi_prime):
            log_phi = math.fsum(path['log_phi'] for path in decomposition.favorable('tau'))
            expected = certificate.log_nsw_pi_prime - log_phi / n
            certificate.identity_error = abs(certificate.log_nsw_rho - expected)

    if not certificate.ok:
        logging.warning('Recombination certificate failed: %s' % certificate.violations)
    return certificate


def optimal_extension_matching(instance, y, H):
    """
    Return the matching pi into H maximizing the product of V_a(y_a + 1_pi(a)).
    """
    H = sorted(H)
    values = _Values(instance, y)
    weights = numpy.array([[values(a, h) for h in H] for a in range(instance.n)], dtype=float)
    weights = weights.reshape(instance.n, len(H))
    columns = nashwelfare.matching.max_product_matching(weights)
    pi = nashwelfare.matching.Matching([None if c is None else H[c] for c in columns.assignment])
    return nashwelfare.matching.complete_matching(pi, H)


def extension_from_optimum(instance, bundles, H):
    """
    Build pi from an integral allocation: every agent takes its most valuable
    singleton among its H items, and the other H items go to agents holding
    none, lowest index first.
    """
    H_set = set(H)
    singles = instance.singleton_values()
    assignment = [None] * instance.n
    for a, bundle in enumerate(bundles):
        held = sorted(j for j in bundle if j in H_set)
        if held:
            assignment[a] = max(held, key=lambda j: (singles[a, j], -j))
    return nashwelfare.matching.complete_matching(nashwelfare.matching.Matching(assignment), H)


def matching_extension_bound(instance, y, H, bundles, opt_log_nsw, agents=None):
    """
    With y* the reference allocation restricted to G' and beta = (1/n) sum
    over A' of V_i(y*_i) / V_i(y'_i), check that NSW(y', pi) (beta + 1) >= OPT
    for pi built from the reference allocation.
    """
    matrix = _matrix(y)
    H_set = set(H)
    rest = [j for j in range(instance.m) if j not in H_set]
    if agents is None:
        agents = [i for i in range(instance.n) if instance.oracles[i].value(rest) > 0]
    values = _Values(instance, matrix)
    terms = []
    for i in agents:
        reference = instance.oracles[i].value([j for j in bundles[i] if j not in H_set])
        value = values(i)
        if value <= 0:
            terms.append(0.0 if reference <= 0 else math.inf)
        else:
            terms.append(reference / value)
    beta = math.fsum(terms) / instance.n
    pi = extension_from_optimum(instance, bundles, H)
    log_nsw = _log_nsw(values, instance.n, pi.assignment)
    if math.isinf(beta) or opt_log_nsw == -math.inf:
        holds = True
    else:
        holds = log_nsw + math.log(beta + 1.0) >= opt_log_nsw - TOLERANCE
    return {
        'beta': beta if math.isfinite(beta) else None,
        'pi': pi.to_list(),
        'log_nsw': nashwelfare.encode_log(log_nsw),
        'opt_log_nsw': nashwelfare.encode_log(opt_log_nsw),
        'holds': holds,
        'note': 'pi built from the brute-forced integral optimum',
    }
