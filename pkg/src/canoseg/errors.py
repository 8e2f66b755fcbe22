"""Exception hierarchy shared across the toolkit.

Two base classes exist so the CLI can map failures to exit codes:
``ConfigError`` -> 2, ``DataError`` -> 3.  Everything else is a bug.
"""


class ConfigError(Exception):
    """A configuration value is missing, malformed, or inconsistent."""


class DataError(Exception):
    """An input file or data structure violates its format contract."""


# corpus
class MissingLine(DataError):
    def __init__(self, marker):
        super().__init__(f"required line marker {marker!r} is absent from block")
        self.marker = marker


class MalformedBlock(DataError):
    pass


class BadRatios(ConfigError):
    pass


class TooFew(ConfigError):
    pass


class EmptyTrainSet(DataError):
    pass


# alignment
class MalformedAlignment(DataError):
    def __init__(self, token):
        super().__init__(f"not an int-int alignment token: {token!r}")
        self.token = token


class IdMismatch(DataError):
    pass


# translation representations
class DimMismatch(DataError):
    pass


class DuplicateSentenceId(DataError):
    pass


class EmbeddingParseError(DataError):
    pass


class IndexOutOfBounds(DataError):
    pass


# autodiff
class ShapeMismatch(ValueError):
    pass


class NotScalar(ValueError):
    pass


# model
class MissingTranslation(ConfigError):
    pass


class DimError(ConfigError):
    pass


# training / metrics
class LengthMismatch(ValueError):
    pass


class EmptyResults(ValueError):
    pass


# experiment harness
class BadSpace(ConfigError):
    pass
