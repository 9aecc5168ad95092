"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so anything raised while
parsing user-supplied files or configs should use one of these rather
than a bare ValueError.
"""


class ConfigError(ValueError):
    """Invalid run configuration or command usage (CLI exit code 2)."""


class FormatError(ValueError):
    """Malformed input file: bad magic, header, or record layout (CLI exit code 3)."""


class AnalysisError(RuntimeError):
    """An analysis operation cannot produce a result from the given data (CLI exit code 4)."""
