"""Exception hierarchy.

Every error carries a short machine-readable ``code``. The CLI maps
:class:`ConfigError` (and graph/validation errors) to exit status 1 and
:class:`NumericalError` to exit status 2.
"""


class OTGamesError(Exception):
    code = "error"


class ValidationError(OTGamesError, ValueError):
    code = "invalid"


class GraphError(ValidationError):
    code = "graph"


class SelfLoopError(GraphError):
    code = "self_loop"


class IndexRangeError(GraphError):
    code = "index_out_of_range"


class DisconnectedGraphError(GraphError):
    code = "disconnected"


class DimensionError(ValidationError):
    code = "dimension_mismatch"


class AntisymmetryError(ValidationError):
    code = "antisymmetry"


class StateError(ValidationError):
    """Vector is not a point of the probability simplex."""

    code = "not_on_simplex"


class BoundaryStateError(ValidationError):
    """Interior state required (log term) but a coordinate is <= 0."""

    code = "boundary_state"


class UnsupportedOperationError(OTGamesError):
    code = "unsupported"


class PotentialMismatchError(ValidationError):
    code = "potential_mismatch"


class ConfigError(ValidationError):
    code = "config"


class NumericalError(OTGamesError, ArithmeticError):
    code = "numerical"


class PayoffEvaluationError(NumericalError):
    def __init__(self, message, strategy=None):
        super().__init__(message)
        self.strategy = strategy

    code = "payoff_evaluation"


class StepSizeUnderflowError(NumericalError):
    def __init__(self, message, t_reached):
        super().__init__(message)
        self.t_reached = t_reached

    code = "step_underflow"


class InvariantViolationError(NumericalError):
    code = "invariant_violation"


class StepTooLargeError(NumericalError):
    code = "step_too_large"


class SwitchingSurfaceError(NumericalError):
    """Jacobian requested where the upwind switch makes the RHS non-smooth."""

    code = "switching_surface"


class DegenerateMetricError(NumericalError):
    code = "degenerate_metric"


class TrajectoryTooShortError(ValidationError):
    code = "trajectory_too_short"
