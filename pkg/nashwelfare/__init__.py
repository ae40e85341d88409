import math
import logging
import datetime
import traceback
import dateutil.tz

import numpy

__package__ = "nashwelfare"
__version__ = "1.0.0"

LOG_ZERO = float('-inf')

# Stream tags for seeded random number streams. A stream is identified by the
# master seed followed by one of these tags and the indices of the task.
STREAM_GRADIENT = 1
STREAM_OBJECTIVE = 2
STREAM_ROUNDING = 3
STREAM_RESTRICTED = 4
STREAM_PROPERTIES = 5
STREAM_GENERATOR = 6


def force_utc(timestamp):
    """
    Force a "naive" timestamp into UTC, or return the original timestamp
    for sane timestamps.
    """
    if not timestamp.tzinfo:
        return timestamp.replace(tzinfo=dateutil.tz.tzutc())
    return timestamp


def utc_now():
    """
    Return the current time as a timezone-aware UTC timestamp.
    """
    return force_utc(datetime.datetime.now(dateutil.tz.tzutc()))


def safe_log(x):
    """
    Natural logarithm taking zero (and negative round-off) to negative infinity.
    """
    if x <= 0:
        return LOG_ZERO
    return math.log(x)


def encode_log(x):
    """
    Encode a log-domain value for JSON output. Negative infinity has no JSON
    representation and is written as the string "-inf".
    """
    if x is None:
        return None
    if math.isinf(x) and x < 0:
        return '-inf'
    return float(x)


def spawn_rng(seed, *path):
    """
    Return a numpy Generator for the stream identified by the master seed and
    a path of non-negative integers. Identical arguments always give identical
    streams, independent of the order in which streams are created.
    """
    entropy = [int(seed)] + [int(p) for p in path]
    return numpy.random.default_rng(numpy.random.SeedSequence(entropy))


def run_with_exception_logging(func):
    """
    Run a function and catch all exceptions while logging them.
    """
    try:
        exit_code = func()
    except Exception as e:
        logging.critical("Fatal error: %s" % e)
        exception = traceback.format_exc().split("\n")
        logging.debug("***********************************************************")
        logging.debug("Uncaught exception during program execution. THIS IS A BUG!")
        logging.debug("***********************************************************")
        for line in exception:
            logging.debug(line)
        exit_code = 255

    return exit_code
