"""Error categories shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class ShapeError(ValueError):
    """Array shapes violate a structural contract."""


class DegenerateInputError(ValueError):
    """Input has valid shape but carries no usable signal."""
