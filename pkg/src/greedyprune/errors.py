"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, LearnerError -> 4.
"""


class ConfigError(Exception):
    """Bad configuration: unknown keys, invalid values, impossible plans."""


class DataError(Exception):
    """Malformed or inconsistent data: CSV parse failures, schema mismatches."""


class LearnerError(Exception):
    """A learner failed internally (numerical breakdown, bad member state)."""
