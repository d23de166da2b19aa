class WFDRError(Exception):
    """Base class for errors raised by :mod:`wfdr`."""


class ConfigurationError(WFDRError, ValueError):
    """Invalid model, weight scheme, experiment config or option."""


class BatchFormatError(WFDRError, ValueError):
    """Malformed hypothesis batch (bad CSV, mismatched lengths, bad weights)."""


class EstimationError(WFDRError, RuntimeError):
    """Lfdr estimation could not be carried out (e.g. a group is too small)."""

    def __init__(self, message, group=None):
        super().__init__(message)
        self.group = group
