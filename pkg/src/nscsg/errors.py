"""Exception types shared across the package."""


class ModelError(Exception):
    """Raised for ill-formed models, states or actions (CLI exit code 2)."""


class ResourceLimitError(Exception):
    """Raised when an enumeration or unfolding exceeds its configured cap (CLI exit code 3).

    Carries partial statistics in ``stats`` when available.
    """

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats or {}


class SolverError(Exception):
    """Raised when a numerical solver fails to produce a usable answer (CLI exit code 4)."""
