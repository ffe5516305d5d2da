"""
Exception hierarchy

Every error raised on purpose by the library derives from RomError so the
CLI can map it to an exit code.
"""

from typing import Dict, Optional


class RomError(Exception):
    """Base class for library errors"""


class ConfigError(RomError):
    """Invalid setting in the environment or a config file"""


class RejectedInputError(RomError):
    """Argument outside its documented domain"""


class SchemaError(RomError):
    """File content does not match the documented schema"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class DimensionMismatchError(RomError):
    """Joint vectors of different lengths were combined"""

    def __init__(self, expected: int, got: int, what: str = "joint vector"):
        super().__init__(f"{what} has dimension {got}, expected {expected}")
        self.expected = expected
        self.got = got


class DegenerateDataError(RomError):
    """Training data cannot define a boundary"""


class ConvergenceError(RomError):
    """The QP solver hit its iteration cap before satisfying KKT"""

    def __init__(self, max_violation: float, iterations: int, tolerance: float):
        super().__init__(
            f"solver did not converge after {iterations} updates: "
            f"max KKT violation {max_violation:.3e} > tolerance {tolerance:.1e}"
        )
        self.max_violation = max_violation
        self.iterations = iterations
        self.tolerance = tolerance


class BoundaryNotEnclosedError(RomError):
    """Gamma stays positive on the border of the integration box"""


class NoFeasibleHyperparametersError(RomError):
    """No (nu, sigma) cell passed all three acceptance constraints"""

    def __init__(self, histogram: Dict[str, int]):
        summary = ", ".join(f"{k}={v}" for k, v in histogram.items())
        super().__init__(f"no feasible hyperparameters ({summary})")
        self.histogram = dict(histogram)
