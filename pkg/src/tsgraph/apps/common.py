"""Shared plumbing for the bundled applications: payload codecs and vertex lookup."""

from __future__ import annotations

import struct

import numpy as np

from ..errors import UnknownVertexError
from ..partition import read_partition_map
from ..store.deploy import PARTITION_MAP
from ..store.host import Deployment

_HEAD = struct.Struct("<Bq")


def pack(kind: int, ids, values=None, dtype=np.float64, extra: int = 0) -> bytes:
    """``kind`` byte, an int64 ``extra`` field, then parallel id and value arrays."""
    ids = np.asarray(ids, dtype=np.int64)
    out = _HEAD.pack(kind, extra) + struct.pack("<q", len(ids)) + ids.tobytes()
    if values is not None:
        out += np.asarray(values, dtype=dtype).tobytes()
    return out


def unpack(payload: bytes, dtype=np.float64):
    """Inverse of :func:`pack`: ``(kind, extra, ids, values_or_None)``."""
    kind, extra = _HEAD.unpack_from(payload)
    (n,) = struct.unpack_from("<q", payload, _HEAD.size)
    at = _HEAD.size + 8
    ids = np.frombuffer(payload, dtype=np.int64, count=n, offset=at)
    at += 8 * n
    values = None
    if at < len(payload):
        values = np.frombuffer(payload, dtype=dtype, count=n, offset=at)
    return kind, extra, ids, values


def kind_of(payload: bytes) -> int:
    return payload[0]


def locate(deployment, vertex_id: int) -> int:
    """Subgraph id holding ``vertex_id``, via the deployment's partition map."""
    root = deployment.root if isinstance(deployment, Deployment) else deployment
    table = read_partition_map(f"{root}/{PARTITION_MAP}")
    hit = np.flatnonzero(table["vid"] == vertex_id)
    if not len(hit):
        raise UnknownVertexError(vertex_id)
    return int(table["sgid"][hit[0]])


def mean_weight(values) -> float | None:
    """Edge weight from a multi-valued attribute: arithmetic mean, ``None`` if empty."""
    if not values:
        return None
    return sum(float(v) for v in values) / len(values)


def collect(outputs: dict) -> dict:
    """Union of per-subgraph ``{vertex: value}`` outputs of one timestep."""
    merged = {}
    for sgid in sorted(outputs):
        merged.update(outputs[sgid])
    return merged
