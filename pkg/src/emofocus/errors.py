"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, DataFormatError and
its subclasses -> 2, DegenerateModelError and its subclasses -> 3.
"""


class EmofocusError(Exception):
    """Base class for all package errors."""


class UsageError(EmofocusError):
    """Caller violated a precondition (bad argument, empty input, ...)."""


class DataFormatError(EmofocusError):
    """An input file does not conform to its documented schema."""


class LabelError(DataFormatError):
    """An emotion label is not part of the active catalog."""


class ModelFileError(DataFormatError):
    """Base class for model persistence failures."""


class TruncatedModelFileError(ModelFileError):
    """Model file ended before the declared payload or checksum."""


class ModelVersionError(ModelFileError):
    """Model file magic bytes or format version not recognized."""


class ModelChecksumError(ModelFileError):
    """Model file checksum does not match its payload."""


class DegenerateModelError(EmofocusError):
    """A model or distribution collapsed to something unusable."""


class DegenerateDistributionError(DegenerateModelError):
    """Every outcome of a distribution carries zero mass."""


class CannotReplaceError(DegenerateModelError):
    """No legal replacement token exists for a distractor position."""
