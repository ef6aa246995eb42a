"""Exception hierarchy shared by every stage of the pipeline."""


class DdaceError(Exception):
    """Base class for all pipeline errors."""


class ParseError(DdaceError):
    """A demonstration or sidecar file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(DdaceError):
    """Parsed data violates a structural invariant."""


class SegmentError(DdaceError):
    """A trajectory segment could not be annotated with a target."""


class SplitError(DdaceError):
    pass


class GraphError(DdaceError):
    """Edge extraction or clustering received an unusable input."""


class NumericError(DdaceError):
    """A non-finite value appeared in a forward or backward pass."""


class TrainingError(DdaceError):
    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch


class CanonicalizationError(DdaceError):
    pass


class ResampleError(DdaceError):
    pass


class GPFitError(DdaceError):
    pass


class AdaptationError(DdaceError):
    pass


class AlignmentError(DdaceError):
    """Execution traces and references do not refer to the same scenarios."""


class ParameterError(DdaceError):
    """An argument is outside its documented range."""
