"""Exception hierarchy shared by the solvers and the command-line front end."""


class RollwaveError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 3


class RegimeError(RollwaveError):
    """Parameters or preconditions outside the supported regime."""

    exit_code = 2


class NumericalError(RollwaveError):
    """A solver failed to converge or a consistency check did not hold."""

    exit_code = 3


class ConfigError(RollwaveError):
    """Malformed or unknown configuration entries."""

    exit_code = 1
