"""Exception hierarchy shared by the library modules and the harness.

The harness maps ``ConfigError`` to exit code 2 and every other failure to
exit code 3.
"""


class LabError(Exception):
    """Root of every error raised on purpose by the laboratory."""


class ConfigError(LabError):
    """Invalid experiment configuration. The message names the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class CheckpointMismatchError(ConfigError):
    def __init__(self, expected, found):
        super().__init__(
            "checkpoint",
            f"written by config hash {found[:12]}, current config hashes to {expected[:12]}",
        )


class PrecisionBudgetError(LabError):
    """A process was asked for more precision or more indices than configured."""


class GaugeError(LabError):
    """A function that is not a gauge, or a gauge operation that is undefined."""


class PercolationBudgetError(LabError):
    pass


class EstimationError(LabError):
    """Not enough data to form an estimate."""
