import os
import tempfile

import pytest

# for python3: from unittest.mock import patch
from mock import patch

import nashwelfare.exceptions
import nashwelfare.generators
import nashwelfare.instancefile
import nashwelfare.program

from nashwelfare.program import Program
from nashwelfare.valuations import AdditiveOracle, Instance


def setup_dirs():
    return tempfile.mkdtemp()


def write_instance(directory, instance, name='instance.json'):
    path = os.path.join(directory, name)
    nashwelfare.instancefile.save_instance(instance, path)
    return path


def write_config(directory, text):
    path = os.path.join(directory, 'nashwelfare.ini')
    with open(path, 'w') as f:
        f.write(text)
    return path


def test_parse_param():
    """
    Test that generator parameters become numbers where possible.
    """
    assert nashwelfare.program.parse_param('density=0.5') == ('density', 0.5)
    assert nashwelfare.program.parse_param('universe=4') == ('universe', 4)
    assert nashwelfare.program.parse_param('name=x') == ('name', 'x')


def test_generate_and_solve():
    """
    Test a generated instance file solved to a report file without timing.
    """
    directory = setup_dirs()
    instance_path = os.path.join(directory, 'coverage.json')
    report_path = os.path.join(directory, 'report.json')
    rc = Program(['generate', 'coverage', '--n', '3', '--m', '5', '--seed', '2', '--param', 'density=0.5',
                  '--out', instance_path]).run()
    assert rc == 0
    expected = nashwelfare.generators.generate_instance('coverage', 3, 5, 2, density=0.5)
    assert nashwelfare.instancefile.load_instance(instance_path) == expected

    rc = Program(['solve', instance_path, '--trials', '3', '--no-timing', '--out', report_path]).run()
    assert rc == 0
    report = nashwelfare.instancefile.load_json(report_path)
    assert len(report['trials']) == 3
    assert 'timing' not in report
    assert report['config']['trials'] == 3


def test_missing_instance_exit_code():
    """
    Test that an unreadable instance file exits with the invalid input code.
    """
    assert Program(['solve', '/this/is/no/file.json']).run() == nashwelfare.exceptions.EXIT_INVALID_INPUT


def test_missing_config_exit_code():
    """
    Test that an unreadable configuration file exits with the invalid input code.
    """
    directory = setup_dirs()
    path = write_instance(directory, Instance([AdditiveOracle([1.0])]))
    rc = Program(['solve', path, '--config', '/this/is/no/config.ini']).run()
    assert rc == nashwelfare.exceptions.EXIT_INVALID_INPUT


def test_malformed_instance_exit_code():
    """
    Test that instance fields of the wrong type exit with the invalid input code.
    """
    directory = setup_dirs()
    documents = (
        '{"n": 1, "m": 1, "labels": ["x"], "agents": [{"family": "additive", "params": {"weights": [1]}}]}',
        '{"n": 1, "m": 1, "agents": [{"family": "additive", "scale": "big", "params": {"weights": [1]}}]}',
        '{"n": 1, "m": 1, "agents": [{"family": "coverage", "params": {"universe_weights": [1], "incidence": [5]}}]}',
        '{"n": 1, "m": 2, "agents": [{"family": "partition_matroid_rank", '
        '"params": {"blocks": [0, 1], "capacities": [1, 1]}}]}',
    )
    for k, text in enumerate(documents):
        path = os.path.join(directory, 'malformed%d.json' % k)
        with open(path, 'w') as f:
            f.write(text)
        assert Program(['solve', path]).run() == nashwelfare.exceptions.EXIT_INVALID_INPUT, text


def test_size_limit_exit_code():
    """
    Test that a brute force above the limit exits with the size limit code.
    """
    directory = setup_dirs()
    path = write_instance(directory, nashwelfare.generators.generate_instance('additive', 3, 6, 0))
    assert Program(['exact', path, '--limit', '10']).run() == nashwelfare.exceptions.EXIT_SIZE_LIMIT


def test_exact_and_compare():
    """
    Test the exact and compare commands on the diagonal instance.
    """
    directory = setup_dirs()
    path = write_instance(directory, Instance([AdditiveOracle([2.0, 0.0]), AdditiveOracle([0.0, 3.0])]), 'diag.json')
    out = os.path.join(directory, 'out.json')
    assert Program(['exact', path, '--out', out]).run() == 0
    assert nashwelfare.instancefile.load_json(out)['allocation'] == [[0], [1]]
    assert os.path.exists(os.path.join(directory, 'diag.exact.json'))
    assert Program(['compare', path, '--out', out]).run() == 0
    assert nashwelfare.instancefile.load_json(out)['exact']['passes']


def test_check_command():
    """
    Test the check command end to end.
    """
    directory = setup_dirs()
    path = write_instance(directory, nashwelfare.generators.generate_instance('additive', 2, 5, 1))
    out = os.path.join(directory, 'check.json')
    assert Program(['check', path, '--small-items-seeds', '20', '--d', '3', '--out', out]).run() == 0
    certificates = nashwelfare.instancefile.load_json(out)['certificates']
    assert certificates['small_items']['seeds'] == 20
    assert certificates['recombination']['decomposition']['d'] == 3.0


def test_configuration_precedence():
    """
    Test that the command line overrides the configuration file, which overrides the defaults.
    """
    directory = setup_dirs()
    config = write_config(directory, '[nashwelfare]\nseed = 5\n\n[rounding]\ntrials = 3\nc = 2\n'
                                     'assign_leftovers = yes\n\n[solver]\nestimator = sample\nsamples =\n')
    program = Program(['solve', 'instance.json', '--config', config, '--trials', '2'])
    program.setup_configuration()
    pipeline_config = program.pipeline_config()
    assert pipeline_config.trials == 2
    assert pipeline_config.seed == 5
    assert pipeline_config.c == 2.0
    assert pipeline_config.d == 4.0
    assert pipeline_config.assign_leftovers
    assert pipeline_config.greedy.estimator == 'sample'
    assert pipeline_config.greedy.samples is None


def test_invalid_configuration_value():
    """
    Test that a configuration value of the wrong type is an input error.
    """
    directory = setup_dirs()
    config = write_config(directory, '[rounding]\ntrials = many\n')
    program = Program(['solve', 'instance.json', '--config', config])
    with pytest.raises(nashwelfare.exceptions.InvalidInstanceException):
        program.setup_configuration()


def test_unknown_command():
    """
    Test that argparse rejects an unknown command.
    """
    with pytest.raises(SystemExit):
        Program(['juggle']).run()


def test_partial_report_on_failure():
    """
    Test that a failing run writes its partial report with the error.
    """
    directory = setup_dirs()
    instance = Instance([AdditiveOracle([5.0, 0.0, 1.0, 0.0]), AdditiveOracle([0.0, 5.0, 0.0, 1.0])])
    path = write_instance(directory, instance)
    out = os.path.join(directory, 'partial.json')
    rc = Program(['solve', path, '--max-iters', '1', '--gain-threshold', '1e-12', '--out', out]).run()
    assert rc == nashwelfare.exceptions.EXIT_INVARIANT
    data = nashwelfare.instancefile.load_json(out)
    assert data['error']['type'] == 'IterationLimitException'
    assert data['H'] == [0, 1]


def test_bench_failures_exit_code():
    """
    Test that a bench with a ratio below 1/380 exits with the invariant code.
    """
    summary = {'runs': 1, 'cases': 1, 'seeds': [0], 'worst_ratio': 0.001, 'mean_ratio': 0.001,
               'failures': [{'case': 'x', 'seed': 0, 'ratio': 0.001}], 'seconds': 0.0}
    with patch('nashwelfare.reference.golden_instances', return_value=[]), \
            patch('nashwelfare.pipeline.bench_command', return_value=summary) as bench:
        rc = Program(['bench', '--seeds', '0', '--families', 'additive', '--no-timing',
                      '--out', os.path.join(setup_dirs(), 'bench.json')]).run()
    assert rc == nashwelfare.exceptions.EXIT_INVARIANT
    assert bench.call_args[0][2] == [0]


def test_unexpected_error_exit_code():
    """
    Test that a bug surfaces as exit code 255.
    """
    directory = setup_dirs()
    path = write_instance(directory, Instance([AdditiveOracle([1.0])]))
    with patch('nashwelfare.pipeline.run_pipeline', side_effect=RuntimeError('boom')):
        assert Program(['solve', path]).run() == 255
