from nashwelfare import force_utc, utc_now, safe_log, encode_log, spawn_rng, LOG_ZERO

import math
import datetime
import dateutil.tz

import nashwelfare


def test_force_utc():
    """
    Test that a naive timestamp is successfully converted into UTC.
    """
    naive_timestamp = datetime.datetime(2000, 1, 1, 12, 0, 0)
    utc_timestamp = force_utc(naive_timestamp)
    assert isinstance(utc_timestamp.tzinfo, dateutil.tz.tzutc)


def test_force_utc_with_timezone():
    """
    Test that a timestamp with timezone is untouched by UTC conversion.
    """
    timezone = dateutil.tz.gettz('GMT+08:00')
    timestamp_source = datetime.datetime(2000, 1, 1, 12, 0, 0, tzinfo=timezone)
    timestamp_dest = force_utc(timestamp_source)
    delta = timestamp_source - timestamp_dest
    assert delta.total_seconds() == 0


def test_utc_now_is_aware():
    """
    Test that report timestamps carry a UTC timezone.
    """
    assert utc_now().utcoffset().total_seconds() == 0


def test_safe_log():
    """
    Test that zero and round-off below zero map to negative infinity.
    """
    assert safe_log(0.0) == LOG_ZERO
    assert safe_log(-1e-18) == LOG_ZERO
    assert safe_log(math.e) == 1.0


def test_encode_log():
    """
    Test that negative infinity is written as a string and other values as floats.
    """
    assert encode_log(LOG_ZERO) == '-inf'
    assert encode_log(0.5) == 0.5
    assert encode_log(None) is None


def test_spawn_rng_streams():
    """
    Test that streams depend on the seed and the path only.
    """
    a = spawn_rng(7, 3, 1).random(5)
    b = spawn_rng(7, 3, 1).random(5)
    c = spawn_rng(7, 3, 2).random(5)
    d = spawn_rng(8, 3, 1).random(5)
    assert (a == b).all()
    assert not (a == c).all()
    assert not (a == d).all()


def test_run_with_exception_logging():
    """
    Test that uncaught exceptions become exit code 255 and return values pass through.
    """
    def crash():
        raise RuntimeError('boom')

    assert nashwelfare.run_with_exception_logging(crash) == 255
    assert nashwelfare.run_with_exception_logging(lambda: 3) == 3
