"""Error types raised across lglab.

Every class carries an ``exit_code`` used by the command line entry point:
2 for usage and input errors, 3 for model-shape errors.
"""

__all__ = ['LGLabError', 'PreconditionError', 'SchemaError', 'ShapeError',
           'FClassError', 'UnsupportedDepthError', 'NumericFaultError',
           'NumericalError', 'ThresholdOverflowError',
           'NotInHardmaxRegimeError', 'ConstructionInfeasibleError',
           'UndefinedTargetError', 'InvalidDistributionError',
           'DivergenceError']


class LGLabError(Exception):
    exit_code = 2


class PreconditionError(LGLabError, ValueError):
    pass


class SchemaError(LGLabError, ValueError):
    """Malformed model document.

    ``path`` is the dotted field path of the offending value and ``offset``
    the byte offset for undecodable JSON.
    """
    def __init__(self, message, path=None, offset=None):
        if path is not None:
            message = '{}: {}'.format(path, message)
        if offset is not None:
            message = '{} (byte offset {})'.format(message, offset)
        super().__init__(message)
        self.path = path
        self.offset = offset


class ShapeError(LGLabError, ValueError):
    exit_code = 3


class FClassError(ShapeError):
    def __init__(self, field, reason):
        super().__init__('model is outside the two-layer class: '
                         '{} {}'.format(field, reason))
        self.field = field


class UnsupportedDepthError(ShapeError):
    pass


class NumericFaultError(LGLabError, RuntimeError):
    def __init__(self, layer, position):
        super().__init__('non-finite value in layer {} at position {}'
                         .format(layer, position))
        self.layer = layer
        self.position = position


class NumericalError(LGLabError, RuntimeError):
    pass


class ThresholdOverflowError(LGLabError, OverflowError):
    pass


class NotInHardmaxRegimeError(PreconditionError):
    pass


class ConstructionInfeasibleError(LGLabError, RuntimeError):
    pass


class UndefinedTargetError(LGLabError, ValueError):
    pass


class InvalidDistributionError(LGLabError, ValueError):
    pass


class DivergenceError(LGLabError, RuntimeError):
    def __init__(self, step, log=None):
        super().__init__('loss became NaN at step {}'.format(step))
        self.step = step
        self.log = log if log is not None else []
