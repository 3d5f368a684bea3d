"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, BudgetError -> 3.
"""


class RadprojError(Exception):
    pass


class ConfigError(RadprojError, ValueError):
    """Invalid parameter or configuration value."""


class BudgetError(RadprojError):
    """A computation was refused because it would exceed a size budget."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ProjectionError(RadprojError, ValueError):
    """Radial projection requested from a viewpoint too close to an atom."""

    def __init__(self, message, atom_index=None, distance=None):
        super().__init__(message)
        self.atom_index = atom_index
        self.distance = distance
