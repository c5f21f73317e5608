"""Exception types shared across the package."""


class SdymError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(SdymError):
    """ADHM matrices have inconsistent shapes."""


class InfiniteChart(SdymError):
    """Operation requested at z = infinity without the z2-chart."""


class PoleAtChartBoundary(SdymError):
    """Closed-form expression evaluated at z = 0 or z = infinity."""


class PoleOutsideAnnulus(SdymError):
    """Loop-matrix polynomial evaluated where one of its terms has a pole."""


class DegenerateLine(SdymError):
    """The quotient space on a line is not numerically 2-dimensional."""


class SingularSystem(SdymError):
    """A basis-expansion linear system is numerically singular."""


class NontrivialSplittingType(SdymError):
    """The factorization linear system is rank-deficient (nonzero partial
    indices; the bundle is not trivial on this line)."""


class NotReal(SdymError):
    """Input loop matrix violates the G* = G reality condition."""


class QuadratureDiverged(SdymError):
    """Radial quadrature tail estimate exceeds the allowed fraction of the bulk."""


class QuadratureTail(SdymError):
    """Contour quadrature did not converge to tolerance."""


class StepFailure(SdymError):
    """Flow integrator local error estimate exceeded tolerance."""


class BlowupReached(SdymError):
    """Scaling flow evaluated at or beyond its finite-time blowup."""


class FitResidualTooLarge(SdymError):
    """Least-squares coefficient fit disagrees with the closed form."""
