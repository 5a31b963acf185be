"""Exceptions raised by pyfive. Bad arguments raise plain ValueError."""


class FiveError(Exception):
    """Base class for failures of the extraction pipeline."""


class WaveFileNotFoundError(FiveError, FileNotFoundError):
    pass


class UnsupportedWaveFormatError(FiveError):
    pass


class TruncatedWaveError(FiveError):
    pass


class WaveWriteError(FiveError):
    pass


class SignalTooShortError(FiveError):
    pass


class NotPositiveDefiniteError(FiveError):
    """Cholesky pivot at or below tolerance. pivot is the 0-based row, bin the stack index (if any)."""

    def __init__(self, pivot, bin=None, value=None):
        self.pivot = pivot
        self.bin = bin
        self.value = value
        where = '' if bin is None else ' in matrix {}'.format(bin)
        super().__init__('matrix not positive definite: pivot {} is {}{}'.format(pivot, value, where))


class EigenConvergenceError(FiveError):
    pass


class SingularTriangularError(FiveError):
    pass


class RankDeficientCovarianceError(FiveError):
    pass


class DegenerateCovarianceError(FiveError):
    pass


class SingularBackgroundError(FiveError):
    pass


class SceneFormatError(FiveError):
    pass


class LengthMismatchError(FiveError):
    pass
