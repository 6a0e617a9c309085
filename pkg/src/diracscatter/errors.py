"""Exception and warning types shared across the package."""


class DiracScatterError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DiracScatterError):
    """Invalid argument values (bad grid sizes, tolerances, enum values)."""


class ClassError(DiracScatterError):
    """Input violates a class membership requirement (support hull,
    positivity, |r| < 1, normalization, symmetry)."""


class DataError(DiracScatterError):
    """Structurally inconsistent data (length mismatches, corrupt files)."""


class NumericsError(DiracScatterError):
    """A numerical procedure failed: stiffness, non-convergence,
    zero-on-boundary after nudging, ill-conditioned linear system."""


class TruncationWarning(UserWarning):
    """A window or series truncation exceeded its nominal tolerance; the
    message carries the estimated error bound."""
