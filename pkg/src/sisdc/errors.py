"""Exception types shared across the package.

Solver and stepping failures carry structured data (iteration counts,
node indices, state locations) so that drivers can report precisely
where a run died instead of re-parsing message strings.
"""

from __future__ import annotations


class SisdcError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(SisdcError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(SisdcError):
    """A run configuration is malformed or inconsistent."""


class NonphysicalStateError(SisdcError):
    """A thermodynamic state left the physical regime (rho <= 0 or e <= 0).

    Attributes
    ----------
    quantity : str
        Which quantity failed ("density" or "internal-energy").
    where : tuple
        Multi-index of the offending entry within the evaluated array.
    value : float
        The offending value.
    """

    def __init__(self, quantity, where=(), value=None, t=None):
        self.quantity = quantity
        self.where = tuple(where)
        self.value = value
        self.t = t
        loc = f" at index {self.where}" if self.where else ""
        at_t = f", t={t:.6g}" if t is not None else ""
        val = f" ({value:.6g})" if value is not None else ""
        super().__init__(f"nonphysical {quantity}{val}{loc}{at_t}")


class SolverError(SisdcError):
    """Base class for linear-solver failures; carries the solve report."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class SolverBreakdownError(SolverError):
    """PCG met nonpositive curvature: the operator is not SPD."""


class NonConvergenceError(SolverError):
    """Iterative solver stagnated or hit its iteration limit."""


class SingularMatrixError(SolverError):
    """Direct factorization hit a zero or negative pivot."""


class StepFailureError(SisdcError):
    """A time step could not be completed."""

    def __init__(self, message, cause=None):
        self.cause = cause
        super().__init__(message)


class SweepFailureError(StepFailureError):
    """An SDC sweep failed; identifies the sweep and node indices.

    sweep index 0 is the predictor, k >= 1 the k-th corrector sweep.
    node index m is 1-based (m-th Radau node).
    """

    def __init__(self, sweep, node, cause=None):
        self.sweep = sweep
        self.node = node
        kind = "predictor" if sweep == 0 else f"corrector sweep {sweep}"
        super().__init__(f"{kind} failed at node m={node}: {cause}", cause)


class InconclusiveSearchError(SisdcError):
    """A bracketing search exhausted its range without a sign change."""

    def __init__(self, message, bracket=None):
        self.bracket = bracket
        super().__init__(message)
