"""Exception types shared across the package."""


class UQCheckError(Exception):
    """Base class for all package errors."""


class LoadError(UQCheckError):
    """Raised when a tabular source cannot be turned into a usable dataset."""


class InsufficientSampleError(UQCheckError):
    """Raised when a statistic is requested on a sample that is too small."""


class ConstantInputError(UQCheckError):
    """Raised when a statistic is undefined for constant input."""


class PartitionError(UQCheckError):
    """Raised for infeasible binning requests or partition/dataset mismatches."""


class SpecError(UQCheckError):
    """Raised for invalid synthetic-dataset specifications."""
