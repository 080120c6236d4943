"""
    Exception hierarchy for the package.

    The command-line entry point maps the three families onto exit codes:
    configuration/usage problems exit with 1, data problems with 2 and
    numerical failures with 3.
"""


class MPNOError(Exception):
    """Base class for every error raised by the package."""
    exit_code = 3


# Usage / configuration -------------------------------------------------------

class ConfigurationError(MPNOError, ValueError):
    exit_code = 1


class GeometryError(ConfigurationError):
    """Invalid grid parameters (spacing, horizon, node counts)."""


# Data -------------------------------------------------------------------------

class DataError(MPNOError, ValueError):
    exit_code = 2


class DatasetFormatError(DataError):
    pass


class ChecksumError(DataError):
    def __init__(self, file_name: str, expected: str, actual: str):
        super().__init__(f"Checksum mismatch for {file_name}: expected {expected}, got {actual}")
        self.file_name = file_name


class GridMismatchError(DataError):
    pass


class NonNestedMeshError(DataError):
    pass


class DataGenerationError(DataError):
    pass


class ZeroForceError(DataError):
    """A sample's force field vanishes, so its relative residual is undefined."""


# Numerical --------------------------------------------------------------------

class NumericalError(MPNOError, ArithmeticError):
    exit_code = 3


class DegenerateBondError(NumericalError):
    def __init__(self, message: str, node: int = None, neighbor: int = None):
        super().__init__(message)
        self.node = node
        self.neighbor = neighbor


class StretchDomainError(NumericalError, ValueError):
    """An analytic stretch function was evaluated at λ ≤ 0."""


class DegenerateKernelError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class NonFiniteGradientError(NumericalError):
    def __init__(self, block: str):
        super().__init__(f"Non-finite gradient in parameter block '{block}'")
        self.block = block


class TrainingDivergedError(NumericalError):
    def __init__(self, message: str, best_model=None, history=None):
        super().__init__(message)
        self.best_model = best_model
        self.history = history


class MetricError(NumericalError):
    pass


class SolverFailure(NumericalError):
    def __init__(self, message: str, phase: str = None, result=None):
        super().__init__(message)
        self.phase = phase
        self.result = result
