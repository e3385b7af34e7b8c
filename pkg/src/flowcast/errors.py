"""Exception hierarchy shared by the library and the CLI.

Each class maps to a distinct process exit code so that scripted callers
can tell IO problems from config problems from dimension problems.
"""

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_DIMENSION = 4
EXIT_NUMERIC = 5


class FlowcastError(Exception):
    """Base class for all flowcast errors."""

    exit_code = 1


class FlowpackFormatError(FlowcastError):
    """Malformed, truncated, or wrong-version flowpack file."""

    exit_code = EXIT_IO


class ConfigError(FlowcastError):
    """Invalid configuration document or parameter value."""

    exit_code = EXIT_CONFIG


class DimensionError(FlowcastError):
    """Array shapes or grids that do not line up."""

    exit_code = EXIT_DIMENSION


class NumericError(FlowcastError):
    """Numerical failure: singular system, non-finite data, etc."""

    exit_code = EXIT_NUMERIC
