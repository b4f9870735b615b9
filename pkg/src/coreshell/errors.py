"""Exception types shared across the package."""


class CoreShellError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CoreShellError):
    """Invalid or inconsistent run configuration."""


class MeshError(CoreShellError):
    """Degenerate geometry or a mesh that violates its own invariants."""


class SolveError(CoreShellError):
    """A linear or nonlinear solve failed to reach its tolerance."""


class StepRejected(CoreShellError):
    """A time step produced a non-physical or non-converged state.

    The driver catches this, halves the time step and retries.
    """


class RunAborted(CoreShellError):
    """The simulation cannot continue (dt underflow, NaN fields, ...)."""
