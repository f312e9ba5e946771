"""Writing a collection to disk as per-host slices.

Directory layout under ``root``::

    manifest.json                 slice inventory with sha256 checksums
    partition_map.bin             vid -> (partition, subgraph) table
    host_<k>/template.slc         topology + schema of every bin on host k
    host_<k>/meta.slc             time, attribute and bin indices
    host_<k>/attr/<class>.<name>/bin<b>.win<w>.slc

Host ``k`` stores partition ``k``. Attribute slices exist for every
non-constant attribute, every bin and every window of
``instances_per_slice`` consecutive instances (the last window may be short).
Constant attributes live only in the template schema.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import TSGraphError
from ..model import EDGE, VERTEX, AttrColumn, AttrKind, Collection
from ..partition import build_subgraphs, partition, partition_table, write_partition_map
from .format import (
    InstanceBlock,
    Slice,
    SliceKind,
    encode_attribute,
    encode_metadata,
    encode_template,
    write_slice,
)
from .layout import LayoutConfig, bin_pack

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
PARTITION_MAP = "partition_map.bin"
TEMPLATE_SLICE = "template.slc"
META_SLICE = "meta.slc"


def host_dir_name(host: int) -> str:
    return f"host_{host}"


def attr_slice_id(element: str, name: str, bin_id: int, window: int) -> str:
    return f"attr/{element}.{name}/bin{bin_id}.win{window}.slc"


def time_windows(instances, per_slice: int) -> list[dict]:
    """Consecutive groups of ``per_slice`` instances whose ranges tile the span."""
    n = len(instances)
    out = []
    for w, lo in enumerate(range(0, n, per_slice)):
        hi = min(lo + per_slice, n)
        t_end = instances[hi][0] if hi < n else instances[n - 1][1]
        out.append({"window": w, "t_start": instances[lo][0], "t_end": t_end, "instances": list(range(lo, hi))})
    return out


@dataclass
class DeploymentManifest:
    root: Path
    data: dict

    @property
    def n_hosts(self) -> int:
        return self.data["n_hosts"]

    def host(self, k: int) -> dict:
        return self.data["hosts"][k]

    def slice_counts(self, k: int) -> dict:
        return self.host(k)["slice_counts"]

    def checksums(self) -> dict:
        return {
            f"{host_dir_name(h['host'])}/{f['path']}": f["sha256"]
            for h in self.data["hosts"]
            for f in h["files"]
        }

    def total_bytes(self) -> int:
        return sum(h["bytes"] for h in self.data["hosts"])

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=1)

    @classmethod
    def load(cls, root) -> "DeploymentManifest":
        root = Path(root)
        with open(root / MANIFEST, encoding="utf-8") as fh:
            return cls(root, json.load(fh))


def _element_index(bins, element):
    """Sorted element ids of a host with their bin and bin-major subgraph position."""
    ids, pos, bin_of = [], [], []
    p = 0
    for b, sgs in bins:
        for sg in sgs:
            elems = sg.vertices if element is VERTEX else sg.all_edge_ids
            ids.append(elems)
            pos.append(np.full(len(elems), p, dtype=np.int64))
            bin_of.append(np.full(len(elems), b, dtype=np.int64))
            p += 1
    ids = np.concatenate(ids) if ids else np.empty(0, np.int64)
    pos = np.concatenate(pos) if pos else np.empty(0, np.int64)
    bin_of = np.concatenate(bin_of) if bin_of else np.empty(0, np.int64)
    order = np.argsort(ids, kind="stable")
    return ids[order], pos[order], bin_of[order]


def _split_by_bin(column: AttrColumn, index, bins, first_pos):
    """Per-bin ``(sg_ptr, column)`` for one instance column restricted to a host."""
    ids_sorted, pos_sorted, bin_sorted = index
    at = np.searchsorted(ids_sorted, column.ids)
    at_clip = np.minimum(at, max(len(ids_sorted) - 1, 0))
    present = (at < len(ids_sorted)) & (ids_sorted[at_clip] == column.ids) if len(ids_sorted) else np.zeros(len(column.ids), bool)
    rows = np.flatnonzero(present)
    row_pos = pos_sorted[at_clip[rows]]
    row_bin = bin_sorted[at_clip[rows]]
    out = {}
    for b, sgs in bins:
        sel = row_bin == b
        brows = rows[sel]
        bpos = row_pos[sel] - first_pos[b]
        order = np.argsort(bpos, kind="stable")
        brows = brows[order]
        counts = np.bincount(bpos[order], minlength=len(sgs))
        sg_ptr = np.zeros(len(sgs) + 1, dtype=np.int64)
        np.cumsum(counts, out=sg_ptr[1:])
        out[b] = (sg_ptr, column.take_rows(brows))
    return out


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def deploy(collection: Collection, n_hosts: int, layout: LayoutConfig, root, seed: int = 0) -> DeploymentManifest:
    """Partition ``collection`` over ``n_hosts`` simulated hosts and write every slice."""
    if n_hosts < 1:
        raise TSGraphError("need at least one host")
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
        probe = root / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise TSGraphError(f"unwritable path {root}: {exc}") from exc

    template = collection.template
    parts = partition(template, n_hosts, seed)
    sgs_by_part = build_subgraphs(template, parts)
    write_partition_map(root / PARTITION_MAP, partition_table(sgs_by_part))

    spans = [(inst.start, inst.end) for inst in collection.instances]
    windows = time_windows(spans, layout.instances_per_slice)
    attrs = [
        (element, a)
        for element in (VERTEX, EDGE)
        for a in template.schema(element)
        if a.kind is not AttrKind.CONSTANT
    ]

    hosts = []
    for k, sgs in enumerate(sgs_by_part):
        n_bins = min(layout.bins_per_partition, len(sgs))
        if n_bins < layout.bins_per_partition:
            warnings.warn(
                f"host {k} has {len(sgs)} subgraphs; using {n_bins} one-subgraph bins "
                f"instead of {layout.bins_per_partition}",
                RuntimeWarning,
                stacklevel=2,
            )
        by_id = {sg.subgraph_id: sg for sg in sgs}
        packed = bin_pack(sgs, n_bins, layout.balance_metric)
        bins = [(b, [by_id[i] for i in ids]) for b, ids in enumerate(packed)]
        first_pos, p = {}, 0
        for b, members in bins:
            first_pos[b] = p
            p += len(members)

        hdir = root / host_dir_name(k)
        hdir.mkdir(parents=True, exist_ok=True)
        files = []

        def emit(s: Slice):
            path = hdir / s.slice_id
            path.parent.mkdir(parents=True, exist_ok=True)
            nbytes = write_slice(s, path)
            files.append({"path": s.slice_id, "kind": s.kind.name.lower(), "bytes": nbytes, "sha256": _sha256(path)})

        span = (spans[0][0], spans[-1][1]) if spans else (0, 0)
        emit(
            Slice(
                SliceKind.TEMPLATE,
                k,
                encode_template(template.directed, template.vertex_schema, template.edge_schema, bins),
                t_start=span[0],
                t_end=span[1],
                slice_id=TEMPLATE_SLICE,
            )
        )

        attr_index = {}
        for element, attr in attrs:
            index = _element_index(bins, element)
            key = f"{element.value}.{attr.name}"
            per_bin = {b: [] for b, _ in bins}
            for t, inst in enumerate(collection.instances):
                col = inst.columns(element).get(attr.name)
                if col is None:
                    col = AttrColumn.empty(attr.value_type)
                for b, (sg_ptr, sub) in _split_by_bin(col, index, bins, first_pos).items():
                    sgids = np.array([sg.subgraph_id for sg in bins[b][1]], dtype=np.int64)
                    per_bin[b].append(InstanceBlock(t, inst.start, inst.end, sgids, sg_ptr, sub))
            attr_index[key] = []
            for b, _ in bins:
                ids = []
                for win in windows:
                    blocks = [per_bin[b][t] for t in win["instances"]]
                    sid = attr_slice_id(element.value, attr.name, b, win["window"])
                    emit(
                        Slice(
                            SliceKind.ATTRIBUTE,
                            k,
                            encode_attribute(blocks, attr.value_type),
                            bin_id=b,
                            window=win["window"],
                            element=element.value,
                            attr=attr.name,
                            t_start=win["t_start"],
                            t_end=win["t_end"],
                            slice_id=sid,
                        )
                    )
                    ids.append(sid)
                attr_index[key].append(ids)

        meta = {
            "host": k,
            "partition_id": k,
            "n_hosts": n_hosts,
            "seed": seed,
            "layout": layout.as_dict(),
            "instances": [list(s) for s in spans],
            "windows": windows,
            "attr_index": attr_index,
            "bin_index": [[sg.subgraph_id for sg in members] for _, members in bins],
            "subgraphs": {
                str(sg.subgraph_id): {"bin": b, "vertices": sg.n_vertices, "edges": sg.n_edges}
                for b, members in bins
                for sg in members
            },
        }
        emit(Slice(SliceKind.METADATA, k, encode_metadata(meta), t_start=span[0], t_end=span[1], slice_id=META_SLICE))

        counts = {"template": 0, "metadata": 0, "attribute": 0}
        for f in files:
            counts[f["kind"]] += 1
        files.sort(key=lambda f: f["path"])
        hosts.append(
            {
                "host": k,
                "partition_id": k,
                "n_subgraphs": len(sgs),
                "n_bins": n_bins,
                "slice_counts": counts,
                "bytes": sum(f["bytes"] for f in files),
                "files": files,
            }
        )
        log.info("host %d: %d subgraphs in %d bins, %s", k, len(sgs), n_bins, counts)

    data = {
        "format": "tsgraph-deployment",
        "version": 1,
        "seed": seed,
        "n_hosts": n_hosts,
        "layout": layout.as_dict(),
        "n_instances": len(spans),
        "n_windows": len(windows),
        "vertices": template.n_vertices,
        "edges": template.n_edges,
        "hosts": hosts,
    }
    manifest = DeploymentManifest(root, data)
    (root / MANIFEST).write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def expected_attr_slices(n_attrs: int, n_bins: int, n_instances: int, per_slice: int) -> int:
    return n_attrs * n_bins * math.ceil(n_instances / per_slice)
