"""Storage micro-benchmarks: full scans over a deployment and parameter sweeps.

Two scan orders are provided:

``subgraph``
    For every host, every subgraph in bin-major order, load all of its
    instances before moving on. This is the read pattern of an analysis that
    walks one subgraph through time.
``time``
    For every host, every instance, load every subgraph in bin-major order.
    This is the read pattern of the iBSP timestep loop.

Rows are reported per subgraph, largest first, with prefix-sum columns so
the cumulative read cost can be plotted against subgraph rank.
"""

from __future__ import annotations

import csv
import io
import itertools
import time
from dataclasses import dataclass, field
from pathlib import Path

from .model import AttrKind
from .store.cache import Counters
from .store.deploy import deploy, expected_attr_slices
from .store.host import Deployment
from .store.layout import LayoutConfig

SCAN_ORDERS = ("subgraph", "time")

ROW_COLUMNS = (
    "rank",
    "host",
    "bin",
    "subgraph_id",
    "vertices",
    "edges",
    "read_ms",
    "slices_read",
    "cache_hits",
    "bytes_read",
    "cum_read_ms",
    "cum_slices_read",
)


@dataclass
class ScanRow:
    host: int
    bin: int
    subgraph_id: int
    vertices: int
    edges: int
    read_s: float = 0.0
    counters: Counters = field(default_factory=Counters)


@dataclass
class ScanReport:
    order: str
    cache_slots: int
    rows: list[ScanRow]
    totals: Counters
    wall_s: float
    n_attrs: int
    n_bins: list[int]
    n_instances: int
    instances_per_slice: int

    @property
    def attr_slices_read(self) -> int:
        return self.totals.attr_slices_read

    def expected_minimum(self) -> int:
        """Attribute slice reads of a scan that reads every slice exactly once."""
        return sum(
            expected_attr_slices(self.n_attrs, b, self.n_instances, self.instances_per_slice) for b in self.n_bins
        )

    def sorted_rows(self) -> list[ScanRow]:
        return sorted(self.rows, key=lambda r: (-(r.vertices + r.edges), r.subgraph_id))

    def table(self) -> list[dict]:
        out = []
        cum_s = 0.0
        cum_reads = 0
        for rank, r in enumerate(self.sorted_rows(), 1):
            cum_s += r.read_s
            cum_reads += r.counters.attr_slices_read
            out.append(
                {
                    "rank": rank,
                    "host": r.host,
                    "bin": r.bin,
                    "subgraph_id": r.subgraph_id,
                    "vertices": r.vertices,
                    "edges": r.edges,
                    "read_ms": round(r.read_s * 1000, 3),
                    "slices_read": r.counters.attr_slices_read,
                    "cache_hits": r.counters.hits,
                    "bytes_read": r.counters.bytes_read,
                    "cum_read_ms": round(cum_s * 1000, 3),
                    "cum_slices_read": cum_reads,
                }
            )
        return out

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        writer = csv.DictWriter(buf, fieldnames=ROW_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.table())
        return buf.getvalue() if fh is None else ""


def _projected(schema, names) -> list:
    return [a for a in schema if a.kind is not AttrKind.CONSTANT and (names is None or a.name in names)]


def scan(deployment, cache_slots: int = 0, order: str = "subgraph", vertex_attrs=None, edge_attrs=None) -> ScanReport:
    """Load every instance of every subgraph once, counting slice reads.

    ``vertex_attrs`` / ``edge_attrs`` project attributes; ``None`` reads all.
    Every host gets a fresh cache of ``cache_slots`` slots.
    """
    if order not in SCAN_ORDERS:
        raise ValueError(f"scan order must be one of {SCAN_ORDERS}")
    if not isinstance(deployment, Deployment):
        deployment = Deployment(deployment)
    hosts = deployment.hosts(cache_slots)
    rows: dict = {}
    totals = Counters()
    t_start = time.perf_counter()
    for h in hosts:
        sgs = list(h.get_subgraphs())
        for sg in sgs:
            rows[sg.subgraph_id] = ScanRow(h.host, h.bin_of(sg.subgraph_id), sg.subgraph_id, sg.n_vertices, sg.n_edges)
        n = len(h.instances)
        if order == "subgraph":
            pairs = ((sg, t) for sg in sgs for t in range(n))
        else:
            pairs = ((sg, t) for t in range(n) for sg in sgs)
        for sg, t in pairs:
            row = rows[sg.subgraph_id]
            t0 = time.perf_counter()
            h.load_instance(sg, t, vertex_attrs, edge_attrs, row.counters)
            row.read_s += time.perf_counter() - t0
        totals.add(h.cache.counters)
    wall = time.perf_counter() - t_start

    meta = hosts[0].meta
    n_attrs = len(_projected(hosts[0].vertex_schema, vertex_attrs)) + len(
        _projected(hosts[0].edge_schema, edge_attrs)
    )
    return ScanReport(
        order,
        cache_slots,
        list(rows.values()),
        totals,
        wall,
        n_attrs,
        [len(h.bins) for h in hosts],
        len(hosts[0].instances),
        meta["layout"]["instances_per_slice"],
    )


SWEEP_COLUMNS = (
    "bins",
    "instances_per_slice",
    "cache_slots",
    "order",
    "subgraphs",
    "attr_slices_read",
    "expected_minimum",
    "cache_hits",
    "bytes_read",
    "wall_ms",
)


@dataclass
class SweepResult:
    reports: dict

    def rows(self) -> list[dict]:
        out = []
        for (bins, ipack, cache), rep in sorted(self.reports.items()):
            out.append(
                {
                    "bins": bins,
                    "instances_per_slice": ipack,
                    "cache_slots": cache,
                    "order": rep.order,
                    "subgraphs": len(rep.rows),
                    "attr_slices_read": rep.attr_slices_read,
                    "expected_minimum": rep.expected_minimum(),
                    "cache_hits": rep.totals.hits,
                    "bytes_read": rep.totals.bytes_read,
                    "wall_ms": round(rep.wall_s * 1000, 1),
                }
            )
        return out

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue() if fh is None else ""


def deployment_path(root, bins: int, ipack: int) -> Path:
    return Path(root) / f"s{bins}-i{ipack}"


def sweep(
    collection,
    root,
    n_hosts: int = 4,
    bins=(4, 8),
    ipack=(1, 5),
    caches=(0, 14),
    order: str = "subgraph",
    seed: int = 0,
) -> SweepResult:
    """Deploy ``collection`` once per (bins, instances_per_slice) and scan it per cache size."""
    if not (bins and ipack and caches):
        raise ValueError("sweep lists must be non-empty")
    reports = {}
    for s, i in itertools.product(bins, ipack):
        path = deployment_path(root, s, i)
        deploy(collection, n_hosts, LayoutConfig(s, i), path, seed=seed)
        dep = Deployment(path)
        for c in caches:
            reports[(s, i, c)] = scan(dep, c, order)
    return SweepResult(reports)
