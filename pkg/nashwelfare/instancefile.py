import json
import logging

import nashwelfare.exceptions
import nashwelfare.valuations


def dumps(data):
    """
    Serialize a document the way every file of this package is written:
    sorted keys, four-space indentation, ASCII only, trailing newline.
    """
    return json.dumps(data, sort_keys=True, indent=4, separators=(',', ': '), allow_nan=False) + '\n'


def save_json(data, path):
    encoded = dumps(data).encode('ascii')
    try:
        with open(path, 'wb') as f:
            f.write(encoded)
    except IOError:
        logging.error('File %s cannot be written' % path)
        raise


def load_json(path):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except IOError as e:
        raise nashwelfare.exceptions.InvalidInstanceException('Cannot read %s: %s' % (path, e.strerror))
    try:
        return json.loads(data.decode('ascii'))
    except UnicodeDecodeError:
        raise nashwelfare.exceptions.InvalidInstanceException('%s: file is not ASCII' % path)
    except ValueError as e:
        line = getattr(e, 'lineno', None)
        column = getattr(e, 'colno', None)
        message = getattr(e, 'msg', str(e))
        if line is not None:
            raise nashwelfare.exceptions.InvalidInstanceException(
                '%s:%d:%d: %s' % (path, line, column, message)
            )
        raise nashwelfare.exceptions.InvalidInstanceException('%s: %s' % (path, message))


def save_instance(instance, path):
    save_json(instance.to_dict(), path)


def load_instance(path):
    """
    Load an instance file, prefixing validation errors with the file name.
    """
    data = load_json(path)
    try:
        return nashwelfare.valuations.Instance.from_dict(data)
    except nashwelfare.exceptions.PropertyViolationException as e:
        raise nashwelfare.exceptions.PropertyViolationException('%s: %s' % (path, e), report=e.report)
    except nashwelfare.exceptions.InvalidInstanceException as e:
        raise nashwelfare.exceptions.InvalidInstanceException('%s: %s' % (path, e))
