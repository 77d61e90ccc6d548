# Error definitions


class GraphFCNError(Exception):
    pass


class DimensionError(GraphFCNError, ValueError):
    pass


class ParameterError(GraphFCNError, ValueError):
    pass


class ValidationError(GraphFCNError, ValueError):
    pass


class ConfigError(GraphFCNError, ValueError):
    pass


class FormatError(GraphFCNError, ValueError):
    """Malformed binary input; `offset` is the byte position where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = '%s (at byte offset %d)' % (message, offset)
        super(FormatError, self).__init__(message)
        self.offset = offset


class UnsupportedVersionError(FormatError):
    pass


class NonFiniteError(GraphFCNError, ArithmeticError):
    pass


class BackwardError(GraphFCNError, RuntimeError):
    pass


class ConvergenceError(GraphFCNError, RuntimeError):
    pass


class UndefinedMetricError(GraphFCNError, ValueError):
    pass


class TrainingError(GraphFCNError, RuntimeError):
    pass
