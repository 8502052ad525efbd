"""Exception hierarchy.

ConfigError covers invalid inputs (CLI exit code 2); NumericalError covers
failures of the solvers and fitters (CLI exit code 3).
"""


class NVChargeError(Exception):
    pass


class ConfigError(NVChargeError, ValueError):
    """Invalid parameter values, profiles, or command configuration."""


class ProfileError(ConfigError):
    """Malformed or inconsistent parameter profile file."""


class NumericalError(NVChargeError):
    """A solver or fitter failed to produce a trustworthy result."""


class DegenerateSteadyStateError(NumericalError):
    """The generator has no unique stationary distribution.

    `blocks` lists the disconnected groups of level names.
    """

    def __init__(self, message, blocks=None):
        super().__init__(message)
        self.blocks = blocks or []


class EvolveError(NumericalError):
    """Time propagation produced an invalid population vector."""


class FitError(NumericalError):
    pass


class NonConvergenceError(FitError):
    pass


class RankDeficientError(FitError):
    """The fit Jacobian does not separate the requested parameters."""


class ParameterAtBoundError(FitError):
    """The optimum sits on a bound; estimates and errors are unreliable."""
