class PvnextError(Exception):
    """Base error. `exit_code` is what the CLI returns, `code` is a short tag."""

    exit_code: int = 1
    code: str = "error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code


class ConfigError(PvnextError):
    exit_code = 2
    code = "config"


class DimensionError(ConfigError):
    code = "dimension"


class DataError(PvnextError):
    exit_code = 3
    code = "data"


class BadMagicError(DataError):
    code = "bad_magic"


class TruncatedFileError(DataError):
    code = "truncated"


class VersionMismatchError(DataError):
    code = "version_mismatch"


class NumericError(PvnextError):
    exit_code = 4
    code = "numeric"
