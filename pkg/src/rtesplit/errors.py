"""Exception types raised by the solver."""


class ConfigurationError(ValueError):
    """Invalid problem or discretization parameters."""


class ResourceLimitError(ValueError):
    """Requested problem size exceeds a built-in guard."""


class NumericalError(RuntimeError):
    """A linear solve or factorization failed its accuracy contract."""
