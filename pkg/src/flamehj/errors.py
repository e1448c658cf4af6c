"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed run configuration or flow block."""


class NonConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    ``best_estimate`` and ``oscillation`` carry the state at the stopping
    point so that callers can record partial results.
    """

    def __init__(self, message, best_estimate=float("nan"), oscillation=float("nan")):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.oscillation = oscillation


class ResonanceError(ValueError):
    """A Fourier mode with p.k = 0 and p.v_k != 0 makes the weak-flow expansion invalid."""
