"""Time-series graph storage and iterative BSP analytics."""

from .engine import (
    AppResult,
    Application,
    ComputeContext,
    MergeContext,
    Message,
    Pattern,
    RunConfig,
    RunStats,
    run,
)
from .generate import AttrSpec, GenSpec, bench_spec, generate, traceroute_attrs
from .model import (
    EDGE,
    VERTEX,
    AttrKind,
    AttributeSchema,
    Collection,
    GraphInstance,
    GraphTemplate,
    ValueType,
    validate,
)
from .partition import build_subgraphs, find_subgraphs, partition
from .store import Deployment, LayoutConfig, deploy

__version__ = "0.1.0"

__all__ = [
    "AppResult",
    "Application",
    "AttrKind",
    "AttrSpec",
    "AttributeSchema",
    "Collection",
    "ComputeContext",
    "Deployment",
    "EDGE",
    "GenSpec",
    "GraphInstance",
    "GraphTemplate",
    "LayoutConfig",
    "MergeContext",
    "Message",
    "Pattern",
    "RunConfig",
    "RunStats",
    "VERTEX",
    "ValueType",
    "bench_spec",
    "build_subgraphs",
    "deploy",
    "find_subgraphs",
    "generate",
    "partition",
    "run",
    "traceroute_attrs",
    "validate",
]
