"""Exception types shared across the library."""


class KatospecError(Exception):
    """Base class for all library errors."""


class NonConvergedQuadrature(KatospecError):
    """Two refinement levels of a quadrature disagreed beyond tolerance."""


class InvalidOrder(KatospecError):
    """Grid order below the supported minimum."""


class CoincidentPoints(KatospecError):
    """A kernel with a 1/|x-y| singularity was evaluated at x == y."""


class NonPositiveTime(KatospecError):
    """heat/Poisson kernels require t > 0."""


class OutOfSupportedRange(KatospecError):
    """Bessel order/argument outside the supported window."""


class BorderlineEigenvalue(UserWarning):
    """Soft warning: eigenvalues within count_tol of the -1 threshold.

    Carries the borderline list in args[1].
    """


class TrackingLost(KatospecError):
    """A bound-state bisection bracket failed to separate eigenvalue counts."""


class NearSingularSolve(KatospecError):
    """The linear system I + V R0(eta) is numerically singular at this eta."""


class InsideCone(KatospecError):
    """The hyperbolic-sine bound-state formula only applies for |x-y| > tau."""


class TruncationTooTight(KatospecError):
    """Spectral-integral weight at eta_max exceeds the tail tolerance."""


class UnderresolvedOscillation(KatospecError):
    """Quadrature too coarse for the requested oscillatory integrand."""


class PreconditionViolated(KatospecError):
    """A check was requested whose hypotheses the potential does not satisfy."""


class ConfigError(KatospecError):
    """Malformed experiment configuration."""
