"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have inconsistent dimensions or pitch."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class ExternalDenoiserError(RuntimeError):
    """Base class for external-denoiser adapter failures."""


class DenoiserSpecError(ExternalDenoiserError):
    """The external denoiser executable is missing or not runnable."""


class DenoiserExitError(ExternalDenoiserError):
    """The external denoiser exited with a nonzero status."""


class DenoiserOutputError(ExternalDenoiserError):
    """The external denoiser produced a malformed or wrong-shape response."""


class DenoiserTimeoutError(ExternalDenoiserError):
    """The external denoiser did not respond within the time limit."""
