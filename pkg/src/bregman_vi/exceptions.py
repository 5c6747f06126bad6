"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """An unsupported combination of setup, set or oracle."""


class DomainError(ValueError):
    """An input lies outside the domain of the requested operation."""


class LineSearchError(RuntimeError):
    """The doubling search hit its cap without accepting a step.

    Usually means the declared L or delta does not match the oracle. The
    last trial is kept on the exception for inspection.
    """

    def __init__(self, message, *, z, w, z_next, L_trial, i, excess):
        super().__init__(message)
        self.z = z
        self.w = w
        self.z_next = z_next
        self.L_trial = L_trial
        self.i = i
        self.excess = excess


class StageError(RuntimeError):
    """An inner solve failed during a restart stage."""

    def __init__(self, message, *, stage, state=None, trace=None):
        super().__init__(message)
        self.stage = stage
        self.state = state
        self.trace = trace
