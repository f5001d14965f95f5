"""Exception taxonomy shared across the package."""


class OtquantError(Exception):
    """Base class for all package-specific errors."""


class DuplicateSites(OtquantError):
    """Two sites coincide exactly; the separating half-plane is undefined."""


class ZeroMass(OtquantError):
    """A density has no pixel with positive value."""


class EmptyCell(OtquantError):
    """A power cell carries zero mass where positive mass is required."""


class EpsilonTooLarge(OtquantError):
    """A separation parameter exceeds the cloud's minimum pairwise distance."""


class NonSquareN(OtquantError):
    """Grid point generation needs N to be a perfect square."""


class FormatError(OtquantError):
    """Malformed input file (PGM image or points CSV)."""


class NotConverged(OtquantError):
    """Solver hit max_iter before reaching the requested residual."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
