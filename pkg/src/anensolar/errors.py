"""Exception types shared across the toolkit."""


class AnensolarError(Exception):
    """Base class for all toolkit errors."""


class TensorFormatError(AnensolarError, ValueError):
    """Base class for tensor construction and serialization errors."""


class TensorHeaderError(TensorFormatError):
    """Malformed file header (bad magic, bad section, bad name rows)."""


class DimensionMismatchError(TensorFormatError):
    """Declared dimensions do not match the data payload."""


class DuplicateNameError(TensorFormatError):
    """Predictor or variable names are not unique."""


class AxisMonotonicityError(TensorFormatError):
    """A time or lead axis is not strictly increasing (or is negative)."""


class InsufficientCandidatesError(AnensolarError):
    """Fewer finite-distance analog candidates than requested members."""


class MissingVariableError(AnensolarError, KeyError):
    """A required variable name is absent from a tensor."""


class EmptySeriesError(AnensolarError, ValueError):
    """A metric was requested on a series that is empty after dropping missing pairs."""


class WorkflowValidationError(AnensolarError, ValueError):
    """A workflow description violates the pipeline/stage/task contract."""


class BackendUnavailableError(AnensolarError, RuntimeError):
    """The task execution backend is down; raised by backends, handled by the engine."""


class ConfigValidationError(AnensolarError, ValueError):
    """Run configuration is invalid; carries the full list of problems."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
