"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class SizeGuardError(ValueError):
    """A dense or brute-force computation was refused because it is too large."""


class InfeasibleParameters(ValueError):
    """Step-size preset requested outside the region where it is defined.

    ``min_m`` is the smallest row count that would make the request valid.
    """

    def __init__(self, message, min_m=None):
        super().__init__(message)
        self.min_m = min_m


class ConfigError(ValueError):
    """Experiment configuration failed validation.

    ``path`` is the dotted field path of the offending entry, e.g. ``solver.period``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
