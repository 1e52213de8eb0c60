"""Exception types shared across the package."""


class ConecalcError(Exception):
    """Base class for all errors raised by this package."""


class ContourError(ConecalcError):
    """Invalid contour parameters, or a contour node collides with spectrum."""


class SymbolError(ConecalcError):
    """Degenerate or inconsistent symbol data (e.g. an identically zero
    conormal polynomial for some mode)."""


class StripBoundaryError(ConecalcError):
    """An indicial root sits on a strip boundary line; the requested count
    is only well defined after a weight shift."""


class GridError(ConecalcError):
    """Grid too coarse or otherwise unusable for the requested operation."""


class OracleError(ConecalcError):
    """The eigendecomposition oracle refuses: eigenvalue on the branch cut
    or eigenvector basis too ill-conditioned."""


class ResolventError(ConecalcError):
    """A shifted system is singular or numerically singular."""

    def __init__(self, msg, lam=None, mode=None):
        super().__init__(msg)
        self.lam = lam
        self.mode = mode


class SolverError(ConecalcError):
    """Time stepping failed (singular step matrix, NaN, spectrum check)."""


class ConfigError(ConecalcError):
    """Configuration file rejected.  ``fields`` lists every offending key."""

    def __init__(self, msg, fields=()):
        super().__init__(msg)
        self.fields = list(fields)
