"""Exception hierarchy shared by the numerical kernels, solvers and simulator."""


class DesatError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DesatError, ValueError):
    """An argument lies outside the domain where a model is defined."""


class SingularMatrixError(DesatError, ArithmeticError):
    """A pivot fell below the singularity tolerance."""


class MatrixOverflowError(DesatError, OverflowError):
    """An intermediate result exceeded the floating point range."""


class SchurConvergenceError(DesatError, ArithmeticError):
    """The QR iteration did not converge within its sweep budget."""


class EigenvalueSplitError(DesatError, ArithmeticError):
    """An eigenvalue is too close to the selection boundary, or a block swap was rejected."""


class SubspaceExtractionError(DesatError, ArithmeticError):
    """The selected invariant subspace does not have a usable graph form."""


class ResidualError(DesatError, ArithmeticError):
    """A computed Riccati solution failed its residual check."""


class IntegrationError(DesatError, RuntimeError):
    """The nonlinear simulation left its region of validity."""


class ConfigError(DesatError, ValueError):
    """A configuration document failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class CompatibilityError(DesatError, ValueError):
    """A stored schedule does not match the configuration it is used with."""

    def __init__(self, mismatches):
        self.mismatches = dict(mismatches)
        detail = ", ".join(f"{k} (file={a!r}, config={b!r})" for k, (a, b) in self.mismatches.items())
        super().__init__(f"schedule incompatible with configuration: {detail}")


class FileFormatError(DesatError, ValueError):
    """An input file (trajectory CSV, schedule JSON) is malformed."""
