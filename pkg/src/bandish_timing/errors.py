"""Exception hierarchy shared by all modules."""


class BandishError(ValueError):
    """Base class for every error raised by this package."""


# notation
class NotationError(BandishError):
    pass


class RowGroupMalformed(NotationError):
    pass


class WidthMismatch(NotationError):
    pass


class InvalidToken(NotationError):
    pass


class OrphanContinuation(NotationError):
    """A continuation marker with nothing before it to continue."""


class UnknownLine(BandishError):
    pass


# dsp
class BandOutOfRange(BandishError):
    pass


class ClipTooShort(BandishError):
    pass


class DegenerateKernel(BandishError):
    pass


# onset
class EmptyReference(BandishError):
    pass


# grid
class AnchorOrderViolation(BandishError):
    pass


class AlternationViolation(BandishError):
    pass


class TooFewAnchors(BandishError):
    pass


class OutOfGridRange(BandishError):
    pass


GridRangeError = OutOfGridRange


# align
class EmptySearchRange(BandishError):
    pass


class ScheduleExhaustsLabels(BandishError):
    pass


# synth
class TempoOutOfRange(BandishError):
    pass


# io / cli
class FormatError(BandishError):
    """Malformed input file (TSV, CSV, config)."""


class ConfigError(BandishError):
    pass
