"""Exception hierarchy shared by all odeal modules."""


class OdealError(Exception):
    """Base class for every error raised by this package."""


# -- data ingestion / encoding ------------------------------------------------

class MissingColumnError(OdealError):
    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(f"missing required columns: {', '.join(self.columns)}")


class MalformedRowError(OdealError):
    def __init__(self, line_number, reason):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class InvalidFlagError(OdealError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"QC flag must be an integer in 1..9, got {value!r}")


class NonFiniteFeatureError(OdealError):
    def __init__(self, feature, value):
        self.feature = feature
        self.value = value
        super().__init__(f"feature {feature!r} is not finite: {value!r}")


class EmptyDatasetError(OdealError):
    pass


class ConstantFeatureError(OdealError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"feature column {index} has zero variance")


class DimensionMismatchError(OdealError):
    pass


class InvalidRateError(OdealError):
    pass


# -- outlier detection --------------------------------------------------------

class TooFewPointsError(OdealError):
    pass


class SolverNotConvergedError(OdealError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"dual solver did not converge within {iterations} iterations "
            f"(KKT residual {residual:.3g})"
        )


class InvalidSizeError(OdealError):
    pass


# -- classifiers --------------------------------------------------------------

class EmptyTrainingSetError(OdealError):
    pass


class NotFittedError(OdealError):
    pass


# -- active learning engine ---------------------------------------------------

class EmptyUnlabeledSetError(OdealError):
    pass


class UnknownIndexError(OdealError):
    def __init__(self, indices):
        self.indices = tuple(indices)
        super().__init__(f"indices not awaiting labels: {sorted(self.indices)}")


class BudgetSmallerThanInitialSetError(OdealError):
    pass


class ExternalTimeoutError(OdealError):
    pass


class LabelSubmissionError(OdealError):
    """Submitted labels do not exactly cover the pending batch."""

    def __init__(self, missing=(), extra=(), invalid=()):
        self.missing = tuple(missing)
        self.extra = tuple(extra)
        self.invalid = tuple(invalid)
        parts = []
        if self.missing:
            parts.append(f"missing indices {sorted(self.missing)}")
        if self.extra:
            parts.append(f"unexpected indices {sorted(self.extra)}")
        if self.invalid:
            parts.append(f"labels outside {{0,1}} for {sorted(self.invalid)}")
        super().__init__("; ".join(parts) or "invalid label submission")


class WrongPhaseError(OdealError):
    """The session is not in a phase that allows this operation."""

    def __init__(self, phase, wanted):
        self.phase = phase
        self.wanted = wanted
        super().__init__(f"session phase is {phase!r}, operation needs {wanted!r}")


class AuditError(OdealError):
    """A pool-state or budget invariant was violated."""


# -- evaluation ---------------------------------------------------------------

class ZeroBaselineCostError(OdealError):
    pass


class TargetUnreachableError(OdealError):
    def __init__(self, arm, target):
        self.arm = arm
        self.target = target
        super().__init__(f"arm {arm!r} never reached target F1 {target}")
