"""Exception hierarchy shared by all modules."""


class NerDebiasError(Exception):
    """Base class for errors raised by this package."""


class ParseError(NerDebiasError):
    """Malformed input line; carries the 1-based line number when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class TagError(ParseError):
    """A tag string that is neither ``O`` nor ``B-<type>``/``I-<type>``."""


class FormatError(NerDebiasError):
    """A table, vocabulary or checkpoint file does not follow its format."""


class ConfigError(NerDebiasError):
    """Invalid or inconsistent configuration."""


class TrainingError(NerDebiasError):
    """Numerical failure during optimisation (e.g. non-finite gradient)."""
