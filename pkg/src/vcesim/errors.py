"""Exception types shared across the package.

CLI exit-code mapping: ConfigError -> 2 (usage/config), DataError -> 3
(data/validation). Plain ValueError from API misuse also maps to 2.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad parameter values, incompatible strides, ..."""


class DataError(ValueError):
    """Invalid data: malformed trace files, broken invariants, infeasible inputs."""


class NoFeasiblePathError(DataError):
    """Every state sequence has zero probability under the model."""
