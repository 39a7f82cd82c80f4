"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad schema, out-of-range parameter, inconsistent shapes."""


class DivergenceError(RuntimeError):
    """A chain produced a non-finite state.

    Attributes
    ----------
    step : int or None
        First step index at which a non-finite value appeared.
    chains : list[int] or None
        Indices of the chains that diverged (ensemble runs).
    """

    def __init__(self, message, step=None, chains=None):
        super().__init__(message)
        self.step = step
        self.chains = chains


class ZeroMassError(RuntimeError):
    """All Monte Carlo weights underflowed to zero mass in a drift evaluation."""


class GradientUnavailable(RuntimeError):
    """The target does not provide an analytic gradient."""
