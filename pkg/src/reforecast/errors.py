"""Exception hierarchy shared by all reforecast modules."""


class ReforecastError(Exception):
    """Base class for every error raised by this package."""


# --- ingestion / data layer ---------------------------------------------

class MissingColumn(ReforecastError):
    """A required CSV column is absent from the header."""


class NonNumericCell(ReforecastError):
    """A value cell could not be parsed as a number."""


class InconsistentHorizonCount(ReforecastError):
    """A forecast sequence row carries a different number of horizon values."""


class EmptyFile(ReforecastError):
    """The input file contains no data rows."""


class TooFewSequences(ReforecastError):
    """Update extraction needs at least two forecast issues."""


class UnfittedTransform(ReforecastError):
    """A marginal transform was used before being fitted."""


class TooFewSamples(ReforecastError):
    """Not enough update sequences for meaningful diagnostics."""


class DegenerateFit(ReforecastError):
    """A parametric fit has no information to work with (e.g. all zeros)."""


# --- autodiff engine ------------------------------------------------------

class ShapeMismatch(ReforecastError):
    """Tensor operands have incompatible shapes."""


class NonScalarLoss(ReforecastError):
    """backward() requires a scalar loss tensor."""


# --- generative models ----------------------------------------------------

class SingularCorrelation(ReforecastError):
    """Correlation matrix is not positive definite even after shrinkage."""


class ConditionerMissing(ReforecastError):
    """A conditional flow was evaluated without its conditioning input."""


class NonFiniteActivation(ReforecastError):
    """A flow layer produced non-finite values."""


class DivergedLoss(ReforecastError):
    """Training loss became non-finite."""


class NonPositiveDiagonal(ReforecastError):
    """Low-rank Gaussian received a non-positive diagonal entry."""


# --- reconstruction / metrics ---------------------------------------------

class CoverageGap(ReforecastError):
    """Pseudo-observations do not cover the requested rebuild window."""


class MisalignedUpdates(ReforecastError):
    """Update sequences do not line up with the rebuild issue grid."""


class EmptyMatrix(ReforecastError):
    """A distance matrix with zero rows or columns has no score."""


class TooFewScenarios(ReforecastError):
    """Energy score needs at least two scenarios."""


class SingleArea(ReforecastError):
    """Variogram score needs at least two areas."""


# --- configuration / CLI ----------------------------------------------------

class InvalidConfig(ReforecastError):
    """A configuration value violates its documented constraints."""


class UsageError(ReforecastError):
    """Bad command-line flags or arguments."""


class ArtifactVersionError(ReforecastError):
    """A model artifact was written by a newer format version."""
