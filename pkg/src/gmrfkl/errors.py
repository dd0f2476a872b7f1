"""Shared exception types for the gmrfkl package.

Every failure mode that callers are expected to branch on gets its own
exception class; all of them derive from :class:`GmrfError` so that a single
``except GmrfError`` catches anything raised deliberately by this package.
"""


class GmrfError(Exception):
    """Base class for all errors raised by gmrfkl."""


class InvalidParams(GmrfError):
    """Model parameters, configuration, or an input file failed validation."""


class DivergedSimulation(GmrfError):
    """A Gibbs sweep produced non-finite site values (unstable dynamics)."""


class SingularCovariance(GmrfError):
    """A covariance matrix could not be factorized (not positive definite)."""


class DegenerateField(GmrfError):
    """A field has zero sample variance, so moments are uninformative."""


class DegenerateNeighborhood(GmrfError):
    """The interaction estimator's denominator vanished (no usable signal
    in the neighborhood sums)."""


class InsufficientSamples(GmrfError):
    """Too few Monte Carlo snapshots to form an estimate with a stderr."""
