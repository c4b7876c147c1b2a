"""
Exception hierarchy for the damped-wave spectral lab.

Every numerical module raises a subclass of LabError so the command line
front end can map failures to exit code 1 and print the class name.
"""


class LabError(Exception):
    """Base class for all lab errors"""


class DiscontinuousProfile(LabError):
    """Gradient predicate requested on a profile with a jump"""


class PoleProximity(LabError):
    """A tangent in the quantization condition is evaluated too close to a pole"""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class NoConvergence(LabError):
    """An iterative solver ran out of iterations"""

    def __init__(self, message, h=None, iterations=None, residual=None):
        super().__init__(message)
        self.h = h
        self.iterations = iterations
        self.residual = residual


class OddMZero(LabError):
    """Odd parity with m=0 has no solution"""


class ParityMismatch(LabError):
    """Requested parity contradicts the boundary condition"""


class DegenerateDerivative(LabError):
    """Newton derivative vanished, a multiple root is likely"""

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class WindingInconsistency(LabError):
    """Subdivided winding numbers disagree with the parent cell"""


class NoGap(LabError):
    """The cutoff support touches the damped region"""


class SupportOverlap(LabError):
    """The quasimode cutoff overlaps {b > 0} on the quadrature grid"""


class ExactEigenmode(LabError):
    """The quasimode is an exact eigenfunction so the lower bound is unbounded"""


class SingularFactorization(LabError):
    """An LU factorization hit an exactly singular pivot"""


class FitUnstable(LabError):
    """Too few points to fit a rate or exponent"""


class CFLViolation(LabError):
    """Time step exceeds the configured stability margin"""

    def __init__(self, message, dt=None, limit=None):
        super().__init__(message)
        self.dt = dt
        self.limit = limit


class NearSpectrum(LabError):
    """Requested point is too close to an eigenvalue of the generator"""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class LocalizationViolation(LabError):
    """An eigenvalue of the generator leaves the admissible region"""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class UsageError(LabError):
    """Bad command line or configuration input"""


class ConfigError(UsageError):
    """Unknown or malformed configuration entry"""
