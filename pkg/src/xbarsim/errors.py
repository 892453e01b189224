"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """Invalid specification, geometry, or experiment configuration."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
