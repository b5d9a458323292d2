"""Error taxonomy shared by the library and the CLI exit codes."""


class CascadeRankError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(CascadeRankError):
    """Invalid configuration: bad hyperparameters, malformed config files,
    unknown model kinds, inconsistent stage definitions."""

    exit_code = 2


class DataError(CascadeRankError):
    """Invalid data: malformed log lines, unknown actions, empty corpora,
    schema mismatches between feature vectors and models."""

    exit_code = 3


class NumericalError(CascadeRankError):
    """Training produced a non-finite loss or parameter. Carries diagnostics."""

    exit_code = 4

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
