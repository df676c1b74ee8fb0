"""
Error types for margin-paths

Conditions that are reported rather than raised (non-convergence, divergence,
monotonicity violations, zero gradients) live as flags on result objects.
"""


class MarginPathsError(Exception):
    """Base class for all library errors"""


class DomainError(MarginPathsError):
    """A log-family argument left the feasible cone (θᵀz_n ≤ 0)"""


class UnsupportedFamily(MarginPathsError):
    """Operation not defined for this prediction-function family"""


class NonSmoothSpec(MarginPathsError):
    """Stationarity check requested on a non-smooth spec"""


class EmptySupport(MarginPathsError):
    """No constraint lies within tolerance of the margin level"""


class AllStartsInfeasible(MarginPathsError):
    """Every multistart run violated a log-family domain constraint"""


class ResolutionTooCoarse(MarginPathsError):
    """A lexicographic survivor set came out empty"""


class DimensionTooLarge(MarginPathsError):
    """Grid oracle requested for total_dim > 3"""


class NonPositiveGamma(MarginPathsError):
    """Block rescaling needs a strictly positive margin"""


class Infeasible(MarginPathsError):
    """Constraint set f_n(w) >= 1 admits no solution"""


class PlantFailed(MarginPathsError):
    """Dataset generator could not plant the requested property"""


class ConfigError(MarginPathsError):
    """Experiment configuration could not be parsed or validated"""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
