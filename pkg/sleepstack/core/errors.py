"""
Error types for the SleepStack toolkit

Every error carries the process exit code the CLI reports for it.
"""


class SleepStackError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


class UsageError(SleepStackError):
    """Invalid flags, config or manifest input"""

    exit_code = 2


class DataFormatError(SleepStackError):
    """Input data that cannot be parsed or is inconsistent"""

    exit_code = 3


class ComputationError(SleepStackError):
    """Numeric or shape failure inside a computation"""

    exit_code = 1


# edf / hypnogram / epochs
class TruncatedHeader(DataFormatError):
    pass


class MalformedField(DataFormatError):
    pass


class ChannelNotFound(DataFormatError):
    pass


class TruncatedRecords(DataFormatError):
    pass


class UnknownStageString(DataFormatError):
    pass


class OverlappingAnnotations(DataFormatError):
    pass


class EpochOutOfBounds(DataFormatError):
    pass


class SamplingRateMismatch(DataFormatError):
    pass


class UnknownRecordingId(DataFormatError):
    pass


class SubjectLeakage(DataFormatError):
    pass


class MissingRecordings(DataFormatError):
    pass


class CorruptEpochStore(DataFormatError):
    pass


class CorruptCheckpoint(DataFormatError):
    pass


class FingerprintMismatch(DataFormatError):
    pass


# nn / model
class ChannelMismatch(ComputationError):
    pass


class ShapeMismatch(ComputationError):
    pass


class WidthTooSmall(ComputationError):
    pass


class BatchTooSmall(ComputationError):
    pass


class BadInputWidth(ComputationError):
    pass


class NonFiniteLogit(ComputationError):
    pass


class NonFiniteLoss(ComputationError):
    pass


# training / baseline / analysis
class EmptyClass(ComputationError):
    pass


class UnstableDesign(ComputationError):
    pass


class ZeroSignal(ComputationError):
    pass


class GroupTooSmall(ComputationError):
    pass


class DegenerateSamples(ComputationError):
    pass


class LengthMismatch(ComputationError):
    pass


class ReportError(ComputationError):
    """Report could not be written (I/O failure or nothing to report)"""
