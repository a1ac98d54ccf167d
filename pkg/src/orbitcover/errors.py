"""Exception types shared across the package."""


class OrbitCoverError(Exception):
    """Base class for all package errors."""


class ParameterError(OrbitCoverError):
    """A scalar or matrix parameter is outside its valid range."""


class NonConvexError(OrbitCoverError):
    """A vertex list does not describe a convex polygon."""

    def __init__(self, message, vertex_index=None):
        super().__init__(message)
        self.vertex_index = vertex_index


class EmptyRegionError(OrbitCoverError):
    """An operation produced or received an empty region."""


class DegenerateCellError(OrbitCoverError):
    """A polygon or cell has (near-)zero area where positive area is required."""


class CoincidentAgentsError(OrbitCoverError):
    """Two agent centers coincide within tolerance."""


class OutOfRegionError(OrbitCoverError):
    """An agent center lies outside (or on the boundary of) the region."""


class BoundaryViolationError(OrbitCoverError):
    """A point that must be strictly interior touched or crossed the boundary."""


class InvalidSpeedError(OrbitCoverError):
    """An agent speed constant is outside its valid range."""


class GradientConsistencyError(OrbitCoverError):
    """Analytic gradients disagreed with the finite-difference check."""


class StaleMomentsError(OrbitCoverError):
    """A node tried to publish cell data that is not current for its round."""


class IncompleteRoundError(OrbitCoverError):
    """A node is missing a required neighbor message for the current round."""


class ProtocolError(OrbitCoverError):
    """Round counters or message delivery violated the synchronous protocol."""


class ScenarioError(OrbitCoverError):
    """A scenario file is malformed; `field` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class TraceFormatError(OrbitCoverError):
    """A trace file does not match the expected CSV schema."""
