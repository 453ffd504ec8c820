"""Exception types shared across the package."""


class KbescError(Exception):
    """Base class for package-specific failures."""


class DataInconsistencyError(KbescError):
    """Measured tubes contradict each other: no function can thread all of them.

    Raised when duplicate inputs carry outputs further apart than the tube
    width allows, or when the min-norm fit's constraint set is empty.
    """


class ApproximationUnavailable(KbescError):
    """The surrogate fit could not be computed reliably this round."""


class CertificationUnavailable(KbescError):
    """A certificate program did not solve to optimality; no bound is claimed."""


class SimulationDivergenceError(KbescError):
    """State norm exceeded the divergence guard during integration."""
