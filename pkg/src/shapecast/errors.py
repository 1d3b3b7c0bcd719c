"""Exception hierarchy for shapecast.

Exit-code mapping used by the CLI lives in cli.py: configuration problems
exit 2, data problems exit 3, numerical failures exit 4.
"""


class ShapecastError(Exception):
    """Base class for all library errors."""


# --- configuration ---------------------------------------------------------

class ConfigError(ShapecastError):
    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"config field {field!r}: {reason}")


class BadDims(ShapecastError):
    """Predictor dimensions are non-positive or inconsistent."""


# --- data ------------------------------------------------------------------

class DataError(ShapecastError):
    """Base for dataset construction and I/O problems."""


class MissingFile(DataError):
    pass


class ParseError(DataError):
    def __init__(self, path, row, col, reason):
        self.path = path
        self.row = row
        self.col = col
        super().__init__(f"{path}: row {row}, column {col}: {reason}")


class NonFiniteValue(DataError):
    pass


class EmptyDataset(DataError):
    pass


class SegmentTooShort(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class ChannelMismatch(DataError):
    pass


class DegenerateChannel(DataError):
    """A channel has zero variance on the fitting split."""


class EmptyTestSet(DataError):
    pass


# --- numerics --------------------------------------------------------------

class NumericalError(ShapecastError):
    """Base for numerical failures (CLI exit 4)."""


class DimMismatch(NumericalError):
    pass


class NonFiniteGradient(NumericalError):
    pass


class EmptyErrors(NumericalError):
    pass


class QOutOfRange(NumericalError):
    pass


class NonPositiveErrors(NumericalError):
    """Log-linear fit needs strictly positive inputs."""


class TooShort(NumericalError):
    pass


class DegenerateVariance(NumericalError):
    """Pearson correlation undefined for a constant vector."""


class ZeroBaseline(NumericalError):
    """Percent change against a zero baseline metric."""


class NotConverged(NumericalError):
    def __init__(self, residuals, message="oracle did not reach tolerance"):
        self.residuals = residuals
        super().__init__(f"{message}: {residuals}")


class InfeasibleFinal(NumericalError):
    """Final trainer point violates the instance constraints beyond tolerance."""


class MissingErmTrace(ShapecastError):
    pass


class ReportMismatch(ShapecastError):
    """Compared reports disagree on prediction length or dataset."""


class AllCandidatesFailed(ShapecastError):
    def __init__(self, failures):
        self.failures = failures
        lines = "; ".join(f"{k}: {v}" for k, v in failures)
        super().__init__(f"every grid candidate failed ({lines})")
