"""Exception hierarchy shared by every fmim module."""


class FMIMError(Exception):
    """Base class for all errors raised by fmim."""


class InvalidSequenceError(FMIMError, ValueError):
    pass


class OverlapError(FMIMError, ValueError):
    pass


class MappingError(FMIMError, ValueError):
    pass


class ShapeError(FMIMError, ValueError):
    pass


class EmptyBatchError(FMIMError, ValueError):
    pass


class NonFiniteLossError(FMIMError, FloatingPointError):
    pass


class NonFiniteGradientError(FMIMError, FloatingPointError):
    pass


class VocabError(FMIMError, IndexError):
    pass


class StaleCacheError(FMIMError, RuntimeError):
    pass


class UnlabeledSentenceError(FMIMError, ValueError):
    pass


class ParseError(FMIMError, ValueError):
    """Bad label or malformed line in a CoNLL file; carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ParseError):
    pass


class ConfigError(FMIMError, ValueError):
    pass


class AlignmentError(FMIMError, ValueError):
    pass


class SchemeError(FMIMError, ValueError):
    pass


class CheckpointError(ConfigError):
    pass
