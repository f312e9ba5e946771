"""Exception hierarchy shared by every tsgraph module."""


class TSGraphError(Exception):
    """Base class for all errors raised by tsgraph."""


class UnknownAttributeError(TSGraphError, KeyError):
    def __init__(self, name):
        super().__init__(f"no such attribute: {name!r}")
        self.name = name

    def __str__(self):
        return self.args[0]


class PartitionError(TSGraphError):
    pass


class CorruptDeploymentError(TSGraphError):
    """A slice file is missing or does not match the deployment manifest."""


class SliceFormatError(CorruptDeploymentError):
    pass


class ChecksumError(SliceFormatError):
    pass


class VersionError(SliceFormatError):
    pass


class PatternError(TSGraphError):
    """A message routing call that the run's design pattern does not allow."""


class UnknownSubgraphError(TSGraphError):
    pass


class ComputeError(TSGraphError):
    """User Compute/Merge logic raised; carries where it happened."""

    def __init__(self, subgraph_id, timestep, superstep, cause):
        phase = "merge" if timestep is None else f"timestep {timestep}"
        super().__init__(
            f"compute failed on subgraph {subgraph_id} at {phase}, superstep {superstep}: {cause!r}"
        )
        self.subgraph_id = subgraph_id
        self.timestep = timestep
        self.superstep = superstep


class NonTerminationError(TSGraphError):
    pass


class InfeasibleSpecError(TSGraphError, ValueError):
    pass


class UnknownVertexError(TSGraphError, KeyError):
    def __init__(self, vertex_id):
        super().__init__(f"unknown vertex {vertex_id}")
        self.vertex_id = vertex_id

    def __str__(self):
        return self.args[0]
