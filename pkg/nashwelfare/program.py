import sys
import logging
import logging.config
import argparse
import configparser

import nashwelfare
import nashwelfare.exceptions
import nashwelfare.generators
import nashwelfare.instancefile
import nashwelfare.pipeline
import nashwelfare.reference
import nashwelfare.relaxation


LOG_FORMAT = 'nashwelfare[%(process)d]: %(threadName)s (%(levelname)s) %(message)s'
DEFAULT_BENCH_SEEDS = (0, 1, 2)

# (section, option, command line destination, type)
CONFIG_OPTIONS = (
    ('nashwelfare', 'seed', 'seed', int),
    ('nashwelfare', 'worker_threads', 'workers', int),
    ('nashwelfare', 'brute_force_limit', 'limit', int),
    ('solver', 'delta', 'delta', float),
    ('solver', 'samples', 'samples', int),
    ('solver', 'gain_threshold', 'gain_threshold', float),
    ('solver', 'max_iterations', 'max_iters', int),
    ('solver', 'estimator', 'estimator', str),
    ('solver', 'exact_support_limit', 'exact_support_limit', int),
    ('rounding', 'c', 'c', float),
    ('rounding', 'trials', 'trials', int),
    ('rounding', 'assign_leftovers', 'assign_leftovers', bool),
    ('recombination', 'd', 'd', float),
    ('recombination', 'small_items_seeds', 'small_items_seeds', int),
)


def parse_param(text):
    """
    Parse a generator parameter given as KEY=VALUE; numbers become int or float.
    """
    if '=' not in text:
        raise argparse.ArgumentTypeError("expected KEY=VALUE, got '%s'" % text)
    key, value = text.split('=', 1)
    for cast in (int, float):
        try:
            return key, cast(value)
        except ValueError:
            pass
    return key, value


class Program(object):
    """
    The command line program. Settings are taken from the command line, then
    from the configuration file, then from the built-in defaults.
    """

    def __init__(self, argv=None):
        self.argv = argv
        self.args = None
        self.config_parser = configparser.ConfigParser(interpolation=None)
        self.settings = {}

    def build_parser(self):
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--config', action='store', help='Path to configuration file')
        common.add_argument('--seed', type=int, help='Master random seed')
        common.add_argument('--delta', type=float, help='Continuous greedy step size')
        common.add_argument('--samples', type=int, help='Monte Carlo samples per estimate')
        common.add_argument('--gain-threshold', type=float, help='Stop when a greedy pass gains less')
        common.add_argument('--max-iters', type=int, help='Maximum number of greedy passes')
        common.add_argument('--estimator', choices=nashwelfare.relaxation.ESTIMATORS,
                            help='Evaluate exactly when possible, or always sample')
        common.add_argument('--exact-support-limit', type=int,
                            help='Largest fractional support evaluated exactly')
        common.add_argument('--c', type=float, help='Large item mass threshold')
        common.add_argument('--d', type=float, help='Recombination parameter (diagnostics)')
        common.add_argument('--trials', type=int, help='Number of rounding trials')
        common.add_argument('--assign-leftovers', action='store_const', const=True,
                            help='Give items discarded by the rounding to the agent gaining most')
        common.add_argument('--workers', type=int, help='Number of worker threads')
        common.add_argument('--limit', type=int, help='Brute force enumeration limit')
        common.add_argument('--small-items-seeds', type=int, help='Roundings for the small items check')
        common.add_argument('--no-timing', action='store_true', help='Leave wall-clock fields out of reports')
        common.add_argument('--out', action='store', help='Write the result here instead of stdout')

        parser = argparse.ArgumentParser(prog='nashwelfare',
                                         description='Nash social welfare for submodular valuations')
        parser.add_argument('--version', action='version', version='%(prog)s ' + nashwelfare.__version__)
        commands = parser.add_subparsers(dest='command', metavar='COMMAND')
        commands.required = True

        for name, text in (('solve', 'Run the approximation algorithm on an instance'),
                           ('exact', 'Brute-force the optimal allocation'),
                           ('compare', 'Run the algorithm and compare it with the optimum'),
                           ('check', 'Run the algorithm and its diagnostic certificates')):
            command = commands.add_parser(name, parents=[common], help=text)
            command.add_argument('instance', help='Instance file')

        generate = commands.add_parser('generate', parents=[common], help='Generate an instance file')
        generate.add_argument('family', choices=nashwelfare.generators.GENERATORS)
        generate.add_argument('--n', type=int, required=True, help='Number of agents')
        generate.add_argument('--m', type=int, required=True, help='Number of items')
        generate.add_argument('--param', type=parse_param, action='append', default=[],
                              metavar='KEY=VALUE', help='Generator parameter, may be repeated')

        bench = commands.add_parser('bench', parents=[common], help='Run the golden corpus')
        bench.add_argument('--seeds', type=int, nargs='+', default=list(DEFAULT_BENCH_SEEDS),
                           help='Pipeline seeds to run every case with')
        bench.add_argument('--families', nargs='+', default=list(nashwelfare.reference.GOLDEN_FAMILIES),
                           choices=nashwelfare.reference.GOLDEN_FAMILIES)
        return parser

    def setup_logging(self):
        if self.args.config and self.config_parser.has_section('loggers'):
            logging.config.fileConfig(self.args.config, disable_existing_loggers=False)
        else:
            logging.basicConfig(format=LOG_FORMAT, level=logging.WARNING)

    def setup_configuration(self):
        self.args = self.build_parser().parse_args(self.argv)

        if self.args.config:
            if not self.config_parser.read(self.args.config):
                logging.basicConfig(format=LOG_FORMAT, level=logging.WARNING)
                raise nashwelfare.exceptions.InvalidInstanceException(
                    'Cannot read configuration file %s' % self.args.config
                )
        self.setup_logging()
        logging.info('Starting nashwelfare %s: %s' % (nashwelfare.__version__, self.args.command))

        for section, option, destination, cast in CONFIG_OPTIONS:
            self.settings[destination] = self.setting(section, option, destination, cast)

    def setting(self, section, option, destination, cast):
        """
        Return the value of one setting, or None when it should take its
        built-in default.
        """
        value = getattr(self.args, destination, None)
        if value is not None:
            return value
        if not self.config_parser.has_option(section, option):
            return None
        text = self.config_parser.get(section, option).strip()
        if not text:
            return None
        try:
            if cast is bool:
                return self.config_parser.getboolean(section, option)
            return cast(text)
        except ValueError:
            raise nashwelfare.exceptions.InvalidInstanceException(
                "Configuration option '%s' in section [%s] has invalid value '%s'" % (option, section, text)
            )

    def pipeline_config(self):
        s = self.settings
        greedy = dict(
            delta=s['delta'],
            samples=s['samples'],
            gain_threshold=s['gain_threshold'],
            max_iterations=s['max_iters'],
            estimator=s['estimator'],
            exact_support_limit=s['exact_support_limit'],
        )
        greedy = nashwelfare.relaxation.GreedyConfig(**dict((k, v) for k, v in greedy.items() if v is not None))
        kwargs = dict(
            c=s['c'],
            trials=s['trials'],
            seed=s['seed'],
            d=s['d'],
            worker_threads=s['workers'],
            assign_leftovers=s['assign_leftovers'],
            brute_force_limit=s['limit'],
            small_items_seeds=s['small_items_seeds'],
        )
        return nashwelfare.pipeline.PipelineConfig(greedy, **dict((k, v) for k, v in kwargs.items()
                                                                  if v is not None))

    def limit(self):
        return self.settings['limit'] or nashwelfare.reference.BRUTE_FORCE_LIMIT

    def emit(self, data):
        if self.args.out:
            nashwelfare.instancefile.save_json(data, self.args.out)
            logging.info('Result written to %s' % self.args.out)
        else:
            sys.stdout.write(nashwelfare.instancefile.dumps(data))

    def emit_report(self, report):
        self.emit(report.to_dict(timing=not self.args.no_timing))

    def load(self):
        return nashwelfare.instancefile.load_instance(self.args.instance)

    def solve(self):
        report = nashwelfare.pipeline.run_pipeline(self.load(), self.pipeline_config())
        self.emit_report(report)
        return 0

    def exact(self):
        data = nashwelfare.pipeline.exact_command(self.load(), self.limit(), self.args.instance)
        self.emit(data)
        return 0

    def compare(self):
        report = nashwelfare.pipeline.compare_command(self.load(), self.pipeline_config())
        self.emit_report(report)
        if report.exact.get('available') and not report.exact['passes']:
            logging.error('Ratio %s is below 1/%d' % (report.exact['ratio'],
                                                      nashwelfare.pipeline.APPROXIMATION_FACTOR))
            return nashwelfare.exceptions.EXIT_INVARIANT
        return 0

    def check(self):
        report = nashwelfare.pipeline.check_command(self.load(), self.pipeline_config())
        self.emit_report(report)
        return 0

    def generate(self):
        instance = nashwelfare.generators.generate_instance(
            self.args.family, self.args.n, self.args.m, self.settings['seed'] or 0, **dict(self.args.param)
        )
        self.emit(instance.to_dict())
        return 0

    def bench(self):
        cases = nashwelfare.reference.golden_instances(families=tuple(self.args.families))
        summary = nashwelfare.pipeline.bench_command(cases, self.pipeline_config(), self.args.seeds)
        if self.args.no_timing:
            del summary['seconds']
        self.emit(summary)
        return nashwelfare.exceptions.EXIT_INVARIANT if summary['failures'] else 0

    def main(self):
        try:
            return getattr(self, self.args.command)()
        except nashwelfare.exceptions.NashWelfareException as e:
            logging.error('%s: %s' % (e.__class__.__name__, e))
            report = getattr(e, 'report', None)
            if self.args.out and hasattr(report, 'to_dict'):
                data = report.to_dict()
                data['error'] = {'type': e.__class__.__name__, 'message': str(e)}
                nashwelfare.instancefile.save_json(data, self.args.out)
                logging.info('Partial report written to %s' % self.args.out)
            return e.exit_code

    def run(self):
        try:
            self.setup_configuration()
        except nashwelfare.exceptions.NashWelfareException as e:
            logging.error('%s' % e)
            return e.exit_code

        rc = nashwelfare.run_with_exception_logging(self.main)
        logging.info('nashwelfare %s finished with exit code %d' % (self.args.command, rc))
        return rc
