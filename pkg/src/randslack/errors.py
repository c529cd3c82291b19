"""Exception types shared across the library."""


class RandslackError(Exception):
    """Base class for all library errors."""


class CardinalityOverflow(RandslackError):
    """A space is too large for exhaustive enumeration."""


class InvalidPoint(RandslackError):
    """A structured point fails its space's validity predicate."""


class InvalidSpaceParams(RandslackError):
    """Structure-space parameters violate a family precondition."""


class DimensionMismatch(RandslackError):
    """Vector dimensions do not agree."""


class NonPermutationOutput(RandslackError):
    """The matching feature map was given a non-permutation output."""


class EmptyProposalSet(RandslackError):
    """A proposal set with no members was supplied where one is required."""


class InvalidBeta(RandslackError):
    """A distortion-mass constant outside [0, 1) was supplied."""


class StepCapExceeded(RandslackError):
    """The local-search step cap triggered; the neighborhood is broken."""


class InvalidScale(RandslackError):
    """Perturbation-scale inputs make the log argument non-positive."""


class SupportMismatch(RandslackError):
    """Two discrete distributions do not share a support."""


class PreconditionViolated(RandslackError):
    """A verification oracle was invoked outside its stated preconditions."""


class RangeWarning(UserWarning):
    """A bound was evaluated outside its stated sparsity range."""
