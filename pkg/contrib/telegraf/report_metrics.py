#!/usr/bin/env python

import os
import argparse
import json


def load_reports(path):
    """!
    @brief Return all report documents found in a directory.
    """
    files = sorted(os.path.join(path, f) for f in os.listdir(path) if f.endswith('.json'))
    reports = []
    for f in files:
        with open(f) as fp:
            data = json.load(fp)
        if 'best' in data:
            reports.append(data)
    return reports


def log_value(value):
    """!
    @brief Decode a log-domain value; "-inf" means the welfare is zero.
    """
    return float('-inf') if value == '-inf' else value


def get_ratio_metrics(reports):
    """!
    @brief Return the worst and mean ratio to the optimum over reports that have one.
    """
    ratios = [r['exact']['ratio'] for r in reports
              if r.get('exact', {}).get('available') and r['exact'].get('ratio') is not None]
    if not ratios:
        return {'count': 0}
    return {
        'count': len(ratios),
        'worst': min(ratios),
        'mean': sum(ratios) / len(ratios),
        'failures': len([r for r in reports if r.get('exact', {}).get('passes') is False]),
    }


def get_log_nsw_metrics(reports):
    """!
    @brief Return the lowest and mean log NSW of the best trials, counting zero welfare apart.
    """
    values = [log_value(r['best']['log_nsw']) for r in reports if r['best']]
    finite = [v for v in values if v != float('-inf')]
    metrics = {'zero': len(values) - len(finite)}
    if finite:
        metrics['lowest'] = min(finite)
        metrics['mean'] = sum(finite) / len(finite)
    return metrics


def get_all_metrics(path):
    """!
    @brief Return a dictionary with all metrics for a directory of reports.
    """
    reports = load_reports(path)
    iterations = [r['greedy_trace']['count'] for r in reports if r.get('greedy_trace')]
    seconds = [r['timing']['seconds'] for r in reports if r.get('timing', {}).get('seconds') is not None]
    return {
        'count': {
            'reports': len(reports),
            'opt_zero': len([r for r in reports if r.get('opt_zero')]),
            'discarded_items': sum(len(r['best'].get('discarded', [])) for r in reports if r['best']),
        },
        'ratio': get_ratio_metrics(reports),
        'log_nsw': get_log_nsw_metrics(reports),
        'greedy_iterations': max(iterations) if iterations else 0,
        'seconds': sum(seconds),
    }


if __name__ == '__main__':
    parser = argparse.ArgumentParser(
        description=
        'This script reads a directory of nashwelfare reports, and prints summary metrics in JSON format. Convenient for use with Telegraf.'
    )
    parser.add_argument('reports', help='Path to a directory of report files')
    args = parser.parse_args()
    print(json.dumps(get_all_metrics(args.reports), indent=4))
