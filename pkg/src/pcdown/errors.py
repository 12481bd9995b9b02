"""Exception types shared across the package.

The CLI maps these onto process exit codes (2 for configuration problems,
3 for diverged optimization), so library code should raise them instead of
bare ValueError when the failure belongs to one of these categories.
"""


class ConfigurationError(ValueError):
    """Invalid or inconsistent run configuration / command-line arguments."""


class DatasetError(ConfigurationError):
    """Dataset directory or file could not be parsed into point clouds."""


class DivergenceError(RuntimeError):
    """Optimization produced a non-finite loss and was aborted."""
