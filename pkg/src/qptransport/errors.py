"""Exception taxonomy shared by all qptransport modules."""


class QPTransportError(Exception):
    """Base class for all errors raised by this package."""


# -- number theory ----------------------------------------------------------

class NearRational(QPTransportError):
    """Continued-fraction expansion hit the machine-precision floor."""


class IndexOutOfRange(QPTransportError):
    """Denominator index outside the computed expansion."""


class ConstructionFailed(QPTransportError):
    """No admissible subsequence could be certified."""


# -- torus functions --------------------------------------------------------

class OutsideStrip(QPTransportError):
    """Evaluation point lies outside the analyticity strip."""


# -- cocycle spectral quantities -------------------------------------------

class NoGapsDetected(QPTransportError):
    """Spectral scan contains no rotation-number plateaus."""


class GridTooCoarse(QPTransportError):
    """Energy grid too coarse for the requested accuracy."""


class NotConverged(QPTransportError):
    """Nested-disk recursion failed to stabilise at maximum depth."""


# -- KAM engine -------------------------------------------------------------

class ResonantAngle(QPTransportError):
    """Rotation angle too close to resonance for algebraic conjugation."""


class NoConvergence(QPTransportError):
    """Algebraic conjugation iteration stopped contracting."""


class PreconditionViolated(QPTransportError):
    """An input inequality of a conjugation lemma fails; message names it."""


class InnerDivergence(QPTransportError):
    """Per-sub-step residual decay factor fell below the threshold."""


class DegenerateRotationPart(QPTransportError):
    """det(G - Q(G)) left the admissible interval (1/2, 2)."""


class ResonanceHit(QPTransportError):
    """Numerically computed rotation number failed non-resonance at a level."""

    def __init__(self, level, message=""):
        self.level = level
        super().__init__(message or f"resonance hit at level {level}")


class ContractFail(QPTransportError):
    """Conjugation residual stopped contracting at the required rate."""


class BranchMismatch(QPTransportError):
    """Finite-difference runs terminated on different reducibility branches."""


# -- evolution --------------------------------------------------------------

class WindowOverflow(QPTransportError):
    """Required lattice window exceeds the configured hard cap."""


class InsufficientSamples(QPTransportError):
    """Not enough sample times inside the exponent fit window."""


class BadOrder(QPTransportError):
    """Moment orders violate p1 >= p2 >= p3 >= 0."""


# -- spectral transform -----------------------------------------------------

class EmptyInterval(QPTransportError):
    """Cutoff requested on an empty interval."""


class NotNested(QPTransportError):
    """Level sets for the weight are not nested."""


class NoReducibilityData(QPTransportError):
    """Bloch-wave evaluation requested without a conjugation chain."""


class QuadratureBudgetExceeded(QPTransportError):
    """Adaptive quadrature hit its node budget before converging."""


class ZeroPhaseDerivative(QPTransportError):
    """Phase derivative vanishes on the interval; integration by parts invalid."""


class InsufficientCorrelations(QPTransportError):
    """Correlation table does not cover the requested k-range."""


# -- CLI --------------------------------------------------------------------

class ConfigInvalid(QPTransportError):
    """Run configuration failed validation (CLI exit code 2)."""
