"""Exception types. CLI exit codes are attached per class."""


class VocalScreenError(Exception):
    exit_code = 2


class FormatError(VocalScreenError):
    pass


class UnsupportedChannelError(FormatError):
    pass


class UnsupportedCodecError(FormatError):
    pass


class EmptyAfterTrimError(VocalScreenError):
    pass


class TooShortError(VocalScreenError):
    pass


class UnvoicedRecordingError(VocalScreenError):
    pass


class InsufficientCyclesError(VocalScreenError):
    pass


class DegenerateSignalError(VocalScreenError):
    exit_code = 3


class InputError(VocalScreenError):
    pass


class InsufficientClassError(VocalScreenError):
    pass


class DegenerateTrainingError(VocalScreenError):
    pass


class ProtocolError(VocalScreenError):
    pass


class UndefinedMetricError(VocalScreenError):
    exit_code = 3


class ConvergenceError(VocalScreenError):
    exit_code = 3

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class SpecError(VocalScreenError):
    pass
