"""Exception types shared across the package."""


class GraspSimError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(GraspSimError, ValueError):
    """An argument is non-finite, out of range, or otherwise unusable."""


class NotFoundError(GraspSimError, KeyError):
    """A named entity (object id, parameter) does not exist."""


class CatalogError(GraspSimError, ValueError):
    """An object catalog file failed validation; message names the offender."""


class ShapeError(GraspSimError, ValueError):
    """Tensor shapes do not agree; message names both shapes."""


class ArchitectureError(GraspSimError, ValueError):
    """A weight store does not match the expected architecture manifest."""


class SingularJacobianError(GraspSimError, ValueError):
    """J·Jᵀ is numerically singular; no pseudoinverse step exists."""


class EmptyBankError(GraspSimError, ValueError):
    """A grasp memory bank with zero candidates was queried."""


class NotReadyError(GraspSimError, RuntimeError):
    """An observation history was queried before warm-up completed."""
