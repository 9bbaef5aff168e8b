"""Exception types shared across the toolkit.

Parser errors carry the 1-based line number of the offending record so
operators can jump straight to the bad line in a trace file.
"""


class ExtSentryError(Exception):
    """Base class for all toolkit errors."""


# --- corpus / parsing ---

class MalformedLine(ExtSentryError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"malformed line {line_no}" + (f": {reason}" if reason else ""))


class NonMonotonicTime(ExtSentryError):
    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"non-monotonic timestamp at line {line_no}")


class UnknownRecordKind(ExtSentryError):
    def __init__(self, line_no: int, kind: str = ""):
        self.line_no = line_no
        self.kind = kind
        super().__init__(f"unknown record kind {kind!r} at line {line_no}")


class MalformedManifest(ExtSentryError):
    pass


# --- signatures ---

class InvalidGlob(ExtSentryError):
    pass


class EmptyInput(ExtSentryError):
    pass


class UnknownId(ExtSentryError):
    pass


# --- features / encoding ---

class UnfittedVocabulary(ExtSentryError):
    pass


class EmptyCorpus(ExtSentryError):
    pass


# --- models ---

class DegenerateLabels(ExtSentryError):
    """Training set does not contain both classes."""


class NonFiniteLoss(ExtSentryError):
    def __init__(self, epoch: int, batch: int = -1):
        self.epoch = epoch
        self.batch = batch
        where = f"epoch {epoch}" + (f", batch {batch}" if batch >= 0 else "")
        super().__init__(f"loss became non-finite at {where}")


class DimensionMismatch(ExtSentryError):
    pass


class EmptyClass(ExtSentryError):
    pass


class EmptySequence(ExtSentryError):
    pass


class IdOutOfRange(ExtSentryError):
    pass


# --- evaluation ---

class LengthMismatch(ExtSentryError):
    pass


class InsufficientData(ExtSentryError):
    pass


class NoAccessTransmitWindow(ExtSentryError):
    pass


class InvalidSpec(ExtSentryError):
    pass


# --- leak verification ---

class EmptyAccessLogWarning(UserWarning):
    """Trace has no recorded accessed values; verdict computed anyway."""
