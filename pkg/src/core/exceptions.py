"""Custom exception classes for the attitude density propagator."""

from typing import Optional


class PropagatorError(Exception):
    """Base class for exceptions in this application."""
    pass


class ValidationError(PropagatorError):
    """Raised when input data or parameters fail validation."""
    pass


class NotSkew(ValidationError):
    """Raised when a matrix handed to vee is not skew-symmetric."""
    def __init__(self, defect: float):
        self.defect = defect
        super().__init__(f"Matrix is not skew-symmetric (||S + S^T||_F = {defect:.3e})")


class NotUnit(ValidationError):
    """Raised when a direction vector is not of unit length."""
    def __init__(self, norm: float):
        self.norm = norm
        super().__init__(f"Vector is not a unit vector (norm = {norm:.15g})")


class NotARotation(ValidationError):
    """Raised when a matrix is not a member of SO(3)."""
    def __init__(self, defect: float):
        self.defect = defect
        super().__init__(f"Matrix is not a rotation (orthogonality/determinant defect = {defect:.3e})")


class NoConvergence(PropagatorError):
    """Raised when the implicit LGVI equation cannot be solved."""
    def __init__(self, max_iter: int, residual: float):
        self.max_iter = max_iter
        self.residual = residual
        super().__init__(f"Newton iteration did not converge in {max_iter} iterations "
                         f"(final residual {residual:.3e})")


class BandlimitTooHighForGrid(PropagatorError):
    """Raised when the quadrature grid cannot resolve the requested bandlimit."""
    def __init__(self, bandlimit: int, n_beta: int):
        self.bandlimit = bandlimit
        self.n_beta = n_beta
        super().__init__(f"Bandlimit L={bandlimit} needs at least {2 * bandlimit + 1} beta nodes, "
                         f"grid has {n_beta}")


class BoxTooSmall(PropagatorError):
    """Raised when the velocity box truncates too much Gaussian mass."""
    def __init__(self, tail_mass: float):
        self.tail_mass = tail_mass
        super().__init__(f"Velocity box leaves {tail_mass:.3e} of the Gaussian mass outside")


class OutOfSupport(PropagatorError):
    """Raised when an angular velocity lies outside the velocity grid box."""
    def __init__(self, omega):
        self.omega = omega
        super().__init__(f"Angular velocity {omega} lies outside the velocity grid")


class DegenerateUpdate(PropagatorError):
    """Raised when a measurement is inconsistent with the prior support."""
    def __init__(self, evidence: float):
        self.evidence = evidence
        super().__init__(f"Measurement evidence {evidence:.3e} is below 1e-300")


class ConfigurationError(PropagatorError):
    """Raised for configuration problems; `field` is the dotted key path."""
    def __init__(self, field: Optional[str], message: str):
        self.field = field
        self.message = message
        prefix = f"{field}: " if field else ""
        super().__init__(f"{prefix}{message}")


class FormatError(PropagatorError):
    """Raised when a density, spectrum or measurement file cannot be parsed."""
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"Error reading {path}: {message}")
