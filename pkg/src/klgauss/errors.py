"""Exception types shared across the package."""

__all__ = [
    "NotACovarianceError",
    "NonFiniteObjectiveError",
    "DegenerateWeightsError",
]


class NotACovarianceError(ValueError):
    """A matrix or parameter that must define a covariance fails to be SPD."""


class NonFiniteObjectiveError(RuntimeError):
    """An objective, gradient or weight evaluated to NaN/inf where that is fatal."""


class DegenerateWeightsError(RuntimeError):
    """Importance weights collapsed onto too few samples to be usable."""
