"""Exception hierarchy.

Two bases matter for the CLI: InputError maps to exit code 2, EstimationError
to exit code 1. WeakInstrumentWarning is a warning category, never raised.
"""


class PosivError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PosivError):
    """Bad inputs: files, configs, specs, schemas."""


class EstimationError(PosivError):
    """Numerical or identification failures during estimation."""


# -- data / config / spec inputs ------------------------------------------

class MissingColumn(InputError):
    """A required field is unmapped or absent from the source."""


class EmptyDataset(InputError):
    """Zero valid rows after validation."""


class MixedArmsWithinUser(InputError):
    """Arm varies within a user id; the instrument is not user-randomized."""


class IoFailure(InputError):
    """File could not be read or written."""


class InvalidConfig(InputError):
    """Simulator configuration violates its invariants."""


class UnknownItem(InputError):
    """Requested item id does not occur in the dataset."""


class ParseError(InputError):
    """Malformed JSON input."""


class InvalidSpec(InputError):
    """Model specification violates its invariants."""


# -- estimation ------------------------------------------------------------

class Underdetermined(EstimationError):
    """Fewer rows than columns in the design."""


class Underidentified(EstimationError):
    """Fewer instruments than endogenous columns (order condition fails)."""


class ConstantColumn(EstimationError):
    """An endogenous or instrument column has zero variance."""


class Collinear(EstimationError):
    """Rank deficiency or condition number overflow in the design."""


class TooFewClusters(EstimationError):
    """Cluster-robust covariance needs at least two clusters."""


class NotJustIdentified(EstimationError):
    """Indirect least squares needs exactly one endogenous column and one instrument."""


class ZeroFirstStage(EstimationError):
    """First-stage coefficient indistinguishable from zero; the ratio is undefined."""


class EmptyInput(EstimationError):
    """An aggregation was handed no fit results."""


class WeakInstrumentWarning(UserWarning):
    """Joint first-stage F below 10; attached to results, never fatal."""
