"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so anything user-facing
should raise one of the three roots (or a subclass) rather than a bare
ValueError.
"""


class ConfigError(Exception):
    """Bad experiment configuration: unknown key, type mismatch, violated invariant."""


class DataError(Exception):
    """Bad input data: malformed TSV, unknown language, empty corpus."""


class NumericError(Exception):
    """Numerical failure: singular system, non-finite loss, undefined statistic."""


class TsvFormatError(DataError):
    """Structural problem in a TSV file; carries the offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class UnknownLanguageError(DataError):
    """A language code was requested that the store does not contain."""

    def __init__(self, lang):
        super().__init__(f"unknown language: {lang!r}")
        self.lang = lang
