"""Slice-based partitioned storage for time-series graph collections."""

from .cache import Counters, SliceCache
from .deploy import DeploymentManifest, deploy, expected_attr_slices, time_windows
from .format import Slice, SliceKind, decode_slice, encode_slice, read_slice, write_slice
from .host import Deployment, HostStore, SubgraphInstance
from .layout import BalanceMetric, LayoutConfig, bin_pack, lpt

__all__ = [
    "BalanceMetric",
    "Counters",
    "Deployment",
    "DeploymentManifest",
    "HostStore",
    "LayoutConfig",
    "Slice",
    "SliceCache",
    "SliceKind",
    "SubgraphInstance",
    "bin_pack",
    "decode_slice",
    "deploy",
    "encode_slice",
    "expected_attr_slices",
    "lpt",
    "read_slice",
    "time_windows",
    "write_slice",
]
