"""Exception types raised by the verification engine."""


class GeometryError(Exception):
    """Base class for all errors raised by this package."""


class DomainViolation(GeometryError):
    """A point lies outside a chart domain (box or guard)."""


class NonFinite(GeometryError):
    """An intermediate value became NaN or infinite."""


class SamplingExhausted(GeometryError):
    """Rejection sampling could not find enough admissible points."""


class SingularMetric(GeometryError):
    """The metric is not positive definite at a point."""


class DegeneratePlane(GeometryError):
    """Two vectors do not span a plane (sectional curvature undefined)."""


class RankUnstable(GeometryError):
    """A singular value falls inside the ambiguous band around the rank threshold."""


class InconsistentC(GeometryError):
    """The structure constant c differs between cyclic pairs or points."""


class ClassificationContradiction(GeometryError):
    """Detected invariants contradict each other (a theorem would be falsified)."""


class StructureViolation(GeometryError):
    """A model fails the structure identities it claims to satisfy."""


class DimensionMismatch(GeometryError):
    """A block of the tangent splitting has an impossible dimension."""


class FDUnstable(GeometryError):
    """A finite-difference estimate does not settle when the step is halved."""


class NotHorizontal(GeometryError):
    """A vector field expected to be horizontal has a vertical component."""


class SingularPairing(GeometryError):
    """A restricted 2-form is too ill-conditioned to invert."""


class UnknownModel(GeometryError, KeyError):
    """No model with the requested name exists."""
