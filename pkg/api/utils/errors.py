# api/utils/errors.py
"""
Exception hierarchy for the verification lab.

Library code raises these; the orchestrator turns them into failed check
records and the HTTP layer maps them onto status codes.
"""


class LabError(Exception):
    """Base class for every error raised by the lab"""


class PoleError(LabError, ValueError):
    """Evaluation point too close to a declared pole"""

    def __init__(self, message: str, location: complex = None):
        super().__init__(message)
        self.location = location


class GenericityError(LabError, ValueError):
    """Parameters sit on (or numerically near) the discriminant"""


class BranchError(LabError, ValueError):
    """A branch convention for a multivalued power was violated"""


class ConvergenceRegimeError(LabError, ValueError):
    """The requested integral is outside its convergence regime"""


class QuadratureError(LabError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance"""

    def __init__(self, message: str, worst_panel=None, variable: int = None):
        super().__init__(message)
        self.worst_panel = worst_panel
        self.variable = variable


class InconclusiveError(LabError, RuntimeError):
    """Numerical rank decision without a clear spectral gap"""


class ConfigError(LabError, ValueError):
    """Invalid run configuration"""

    def __init__(self, message: str, field: str = None):
        super().__init__(message)
        self.field = field
