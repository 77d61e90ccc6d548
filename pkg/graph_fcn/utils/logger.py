import logging
import sys
import time

project_name = 'graph_fcn'
_logger = logging.getLogger(project_name)
_logger.propagate = False


class _PrefixFormatter(logging.Formatter):
    # 'I graph_fcn 10-18 13:05:22.041 training.py:97] message'
    def format(self, record):
        now_tuple = time.localtime(record.created)
        prefix = '%s %s %02d-%02d %02d:%02d:%02d.%03d %s:%d] ' % (
            record.levelname[0],
            project_name,
            now_tuple[1],  # month
            now_tuple[2],  # day
            now_tuple[3],  # hour
            now_tuple[4],  # min
            now_tuple[5],  # sec
            int(record.msecs),
            record.filename,
            record.lineno)
        return prefix + record.getMessage()


# stdout is reserved for machine-readable command output
_handler = logging.StreamHandler(sys.stderr)
_handler.setFormatter(_PrefixFormatter())
_logger.addHandler(_handler)
_logger.setLevel(logging.INFO)


def logging_verbosity(verbosity=logging.INFO):
    _logger.setLevel(verbosity)


def debug(msg, *args, **kwargs):
    _logger.debug(msg, *args, stacklevel=2, **kwargs)


def info(msg, *args, **kwargs):
    _logger.info(msg, *args, stacklevel=2, **kwargs)


def warn(msg, *args, **kwargs):
    _logger.warning(msg, *args, stacklevel=2, **kwargs)


def error(msg, *args, **kwargs):
    _logger.error(msg, *args, stacklevel=2, **kwargs)


def fatal(msg, *args, **kwargs):
    _logger.critical(msg, *args, stacklevel=2, **kwargs)
