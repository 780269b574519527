"""Exception taxonomy shared across the package.

CLI exit codes: hypothesis failures map to 2, solver failures to 3,
integrity failures to 4; everything else is a generic error (1).
"""


class NehariflowError(Exception):
    """Base class for all package errors."""


class ConfigError(NehariflowError):
    """Malformed or inconsistent run configuration."""


class GeometryError(NehariflowError):
    """Degenerate or incompatible geometric data (radii, annuli, obstacles)."""


class DomainError(NehariflowError):
    """Mathematical domain violation (non-finite input, N < 3, ...)."""


class DefinitenessError(NehariflowError):
    """Discrete quadratic form is not positive definite."""

    def __init__(self, msg, ritz_min=None):
        super().__init__(msg)
        self.ritz_min = ritz_min


class DivergenceError(NehariflowError):
    """A required integral diverges; carries the partial sums seen so far."""

    def __init__(self, msg, partial_sums=None):
        super().__init__(msg)
        self.partial_sums = list(partial_sums or [])


class HypothesisError(NehariflowError):
    """A structural hypothesis on f or V fails."""


class SolverError(NehariflowError):
    """Linear or nonlinear solve failed; may carry a residual history."""

    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = list(residuals or [])


class StagnationError(SolverError):
    """Backtracking line search was exhausted."""


class BracketError(SolverError):
    """Root bracketing for the ray scaling failed."""


class SignError(NehariflowError):
    """Field lacks the sign structure required by the operation."""


class SignCollapseError(SolverError):
    """One sign of a nodal iterate lost essentially all its mass."""


class EscapeError(SolverError):
    """Descent escaped to the nonpositive-energy sublevel before converging."""


class IntegrityError(NehariflowError):
    """Manifest/file hash mismatch or missing artifact."""
