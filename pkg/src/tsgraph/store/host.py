"""Read-side access to a deployment: one :class:`HostStore` per simulated host."""

from __future__ import annotations

import hashlib
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from ..errors import CorruptDeploymentError, UnknownAttributeError
from ..model import EDGE, EXISTS_ATTR, VERTEX, AttrColumn, AttrKind, ElementClass, resolve_values
from ..partition import SubgraphTemplate
from .cache import Counters, SliceCache
from .deploy import META_SLICE, TEMPLATE_SLICE, DeploymentManifest, host_dir_name
from .format import (
    AttributeBlocks,
    SliceKind,
    decode_metadata,
    decode_template,
    read_slice,
    schema_from_json,
)


class SubgraphInstance:
    """A subgraph's topology plus projected attribute values for one instance.

    Value lookups apply default/constant inheritance. Asking for an attribute
    that was not projected raises :class:`UnknownAttributeError`; constant
    attributes are always available.
    """

    def __init__(self, template: SubgraphTemplate, index, start, end, schema, vertex_values, edge_values):
        self.template = template
        self.index = index
        self.start = start
        self.end = end
        self._schema = schema
        self._columns = {VERTEX: vertex_values, EDGE: edge_values}

    @property
    def subgraph_id(self) -> int:
        return self.template.subgraph_id

    @property
    def vertex_values(self) -> dict:
        return self._columns[VERTEX]

    @property
    def edge_values(self) -> dict:
        return self._columns[EDGE]

    def columns(self, element: ElementClass) -> dict:
        return self._columns[element]

    def values(self, element: ElementClass, element_id: int, name: str) -> list:
        try:
            attr = self._schema[element][name]
        except KeyError:
            raise UnknownAttributeError(name) from None
        if attr.kind is AttrKind.CONSTANT:
            return attr.schema_values
        cols = self._columns[element]
        if name not in cols:
            raise UnknownAttributeError(f"{name} (not projected)")
        return resolve_values(attr, cols[name], element_id)

    def vertex(self, vertex_id: int, name: str) -> list:
        return self.values(VERTEX, vertex_id, name)

    def edge(self, edge_id: int, name: str) -> list:
        return self.values(EDGE, edge_id, name)

    def _flag(self, element, element_id) -> bool:
        if EXISTS_ATTR not in self._schema[element]:
            return True
        return all(bool(v) for v in self.values(element, element_id, EXISTS_ATTR))

    def vertex_exists(self, vertex_id: int) -> bool:
        return self._flag(VERTEX, vertex_id)

    def edge_exists(self, edge_id: int, src: int | None = None, dst: int | None = None) -> bool:
        """Edge flag plus existence of whichever endpoints are local.

        A remote endpoint's flag lives on another host; the receiving side
        checks it when the traversal arrives.
        """
        if not self._flag(EDGE, edge_id):
            return False
        for v in (src, dst):
            if v is not None and v in self.template and not self._flag(VERTEX, v):
                return False
        return True

    def __repr__(self):
        return f"SubgraphInstance({self.subgraph_id:#x}, t={self.index}, [{self.start},{self.end}))"


class HostStore:
    """Local-partition view of a deployment with its own slice cache.

    Opening a store reads the template and metadata slices once; they stay
    in memory and are counted in :attr:`open_counters`.
    """

    def __init__(self, root, host: int, cache_slots: int = 0):
        self.root = Path(root)
        self.host = host
        self.dir = self.root / host_dir_name(host)
        self.counters = Counters()
        self.open_counters = Counters()
        self.cache = SliceCache(cache_slots, self._load)

        meta_slice = self._read(META_SLICE, self.open_counters)
        self.meta = decode_metadata(meta_slice.payload)
        tpl_slice = self._read(TEMPLATE_SLICE, self.open_counters)
        header, bins = decode_template(tpl_slice.payload, self.meta["partition_id"])
        self.counters.add(self.open_counters)

        self.partition_id = self.meta["partition_id"]
        self.directed = header["directed"]
        self.vertex_schema = schema_from_json(header["vertex_schema"])
        self.edge_schema = schema_from_json(header["edge_schema"])
        self.schema = {
            VERTEX: {a.name: a for a in self.vertex_schema},
            EDGE: {a.name: a for a in self.edge_schema},
        }
        self.bins = [[sg.subgraph_id for sg in sgs] for _, sgs in bins]
        self.subgraphs = {sg.subgraph_id: sg for _, sgs in bins for sg in sgs}
        self._bin_of = {}
        self._pos_in_bin = {}
        for b, ids in enumerate(self.bins):
            for p, sgid in enumerate(ids):
                self._bin_of[sgid] = b
                self._pos_in_bin[sgid] = p
        self.instances = [tuple(x) for x in self.meta["instances"]]
        self.windows = self.meta["windows"]
        self._window_of = {t: w["window"] for w in self.windows for t in w["instances"]}
        self.attr_index = self.meta["attr_index"]

    def _path(self, slice_id: str) -> Path:
        return self.dir / slice_id

    def _read(self, slice_id: str, *scopes: Counters):
        path = self._path(slice_id)
        try:
            s = read_slice(path, slice_id)
        except FileNotFoundError:
            raise CorruptDeploymentError(f"corrupt deployment: missing slice {self.host}:{slice_id}") from None
        nbytes = path.stat().st_size
        for c in scopes:
            c.fetches += 1
            c.misses += 1
            c.slices_read += 1
            c.bytes_read += nbytes
        return s

    def _load(self, slice_id: str):
        path = self._path(slice_id)
        try:
            s = read_slice(path, slice_id)
        except FileNotFoundError:
            raise CorruptDeploymentError(f"corrupt deployment: missing slice {self.host}:{slice_id}") from None
        if s.kind is not SliceKind.ATTRIBUTE:
            raise CorruptDeploymentError(f"corrupt deployment: {slice_id} is not an attribute slice")
        element = VERTEX if s.element == "vertex" else EDGE
        vtype = self.schema[element][s.attr].value_type
        return AttributeBlocks(s.payload, vtype), path.stat().st_size, True

    def cache_fetch(self, slice_id: str, *scopes: Counters):
        """Decoded attribute slice ``{instance_index: InstanceBlock}`` through the LRU cache."""
        return self.cache.fetch(slice_id, self.counters, *scopes)

    # -- iteration API -------------------------------------------------------

    def get_subgraphs(self) -> Iterator[SubgraphTemplate]:
        """Every local subgraph, all of bin ``k`` before any of bin ``k+1``."""
        for ids in self.bins:
            for sgid in ids:
                yield self.subgraphs[sgid]

    @property
    def subgraph_ids(self) -> list[int]:
        return [sgid for ids in self.bins for sgid in ids]

    def bin_of(self, subgraph_id: int) -> int:
        return self._bin_of[subgraph_id]

    def _check_attrs(self, element, names):
        if names is None:
            return [a for a in self.schema[element]]
        for n in names:
            if n not in self.schema[element]:
                raise UnknownAttributeError(n)
        return list(dict.fromkeys(names))

    def instance_indices(self, start, end) -> list[int]:
        """Instances whose range intersects ``[start, end)``, via the time index."""
        if start >= end:
            return []
        out = []
        for w in self.windows:
            if w["t_start"] < end and w["t_end"] > start:
                for t in w["instances"]:
                    s, e = self.instances[t]
                    if s < end and e > start:
                        out.append(t)
        return out

    def get_instances(
        self,
        subgraph,
        start,
        end,
        vertex_attrs: Sequence[str] | None = None,
        edge_attrs: Sequence[str] | None = None,
        counters: Counters | None = None,
    ) -> Iterator[SubgraphInstance]:
        """Time-ordered instances of one local subgraph overlapping ``[start, end)``.

        Only the projected attributes are read, and only from the slices of
        the windows that overlap the range. ``None`` projects every attribute.
        """
        vnames = self._check_attrs(VERTEX, vertex_attrs)
        enames = self._check_attrs(EDGE, edge_attrs)
        indices = self.instance_indices(start, end)
        return (self._assemble(subgraph, t, vnames, enames, counters) for t in indices)

    def load_instance(self, subgraph, index, vertex_attrs=None, edge_attrs=None, counters=None):
        vnames = self._check_attrs(VERTEX, vertex_attrs)
        enames = self._check_attrs(EDGE, edge_attrs)
        return self._assemble(subgraph, index, vnames, enames, counters)

    def _assemble(self, subgraph, index, vnames, enames, counters) -> SubgraphInstance:
        sg = self.subgraphs[subgraph if isinstance(subgraph, (int, np.integer)) else subgraph.subgraph_id]
        b = self._bin_of[sg.subgraph_id]
        pos = self._pos_in_bin[sg.subgraph_id]
        w = self._window_of[index]
        scopes = (self.counters,) if counters is None else (self.counters, counters)
        cols = {}
        for element, names in ((VERTEX, vnames), (EDGE, enames)):
            cols[element] = {}
            for name in names:
                if self.schema[element][name].kind is AttrKind.CONSTANT:
                    continue
                sid = self.attr_index[f"{element.value}.{name}"][b][w]
                blocks = self.cache.fetch(sid, *scopes)
                cols[element][name] = blocks[index].subgraph_column(pos)
        start, end = self.instances[index]
        return SubgraphInstance(sg, index, start, end, self.schema, cols[VERTEX], cols[EDGE])


class Deployment:
    """An on-disk deployment opened for reading."""

    def __init__(self, root):
        self.root = Path(root)
        self.manifest = DeploymentManifest.load(self.root)

    @property
    def n_hosts(self) -> int:
        return self.manifest.n_hosts

    @property
    def n_instances(self) -> int:
        return self.manifest.data["n_instances"]

    def host(self, k: int, cache_slots: int = 0) -> HostStore:
        return HostStore(self.root, k, cache_slots)

    def hosts(self, cache_slots: int = 0) -> list[HostStore]:
        return [self.host(k, cache_slots) for k in range(self.n_hosts)]

    def verify(self) -> list[str]:
        """Files whose checksum no longer matches the manifest."""
        bad = []
        for rel, digest in self.manifest.checksums().items():
            path = self.root / rel
            if not path.exists() or hashlib.sha256(path.read_bytes()).hexdigest() != digest:
                bad.append(rel)
        return bad

    @cached_property
    def instances(self) -> list[tuple]:
        return self.host(0).instances
