"""Exception hierarchy shared by the simulator modules."""

from __future__ import annotations


class HerglotzSimError(Exception):
    """Base class for all simulator errors."""


class NonPositiveDefinite(HerglotzSimError):
    def __init__(self, q, message: str = "metric is not positive definite"):
        super().__init__(f"{message} at q={list(q)!r}")
        self.q = q


class DegenerateNormal(HerglotzSimError):
    """The gradient of a gap function vanishes at the contact point."""


class GrazingContact(HerglotzSimError):
    """Normal approach velocity is below the grazing tolerance."""


class SingularConstraintMass(HerglotzSimError):
    """The constraint Gram matrix psi g^-1 psi^T is (numerically) singular."""


class InvalidTriple(HerglotzSimError, ValueError):
    """A corank triple that no generalized codistribution can produce."""


class StepSizeUnderflow(HerglotzSimError):
    pass


class ZenoDetected(HerglotzSimError):
    """Too many events in one window; carries the partial trajectory."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class InconsistentInitialState(HerglotzSimError, ValueError):
    pass
