"""Exception types shared across the package and mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class SolverError(RuntimeError):
    """Numerical solver failed or did not converge (CLI exit code 3)."""


class ResourceError(RuntimeError):
    """A configured resource cap (dimension, memory) was exceeded (CLI exit code 3)."""
