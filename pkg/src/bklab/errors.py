"""Exception types shared across the package."""


class ModelError(ValueError):
    """A model violates an admissibility condition (coefficients, density
    smoothness, exponent ranges). Maps to CLI exit code 2."""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration. CLI exit code 2."""


class NumericalError(RuntimeError):
    """A numerical routine failed (root bracketing, factorization).
    CLI exit code 3."""
