"""Seeded synthetic time-series graph collections.

Topologies come from networkx; attribute values are drawn with numpy. The
graph may be split into several disjoint communities of heavy-tailed sizes,
which mimics crawled network data where a partition ends up holding many
subgraphs of very different size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import InfeasibleSpecError
from .model import (
    EDGE,
    EXISTS_ATTR,
    VERTEX,
    AttrColumn,
    AttributeSchema,
    AttrKind,
    Collection,
    ElementClass,
    GraphInstance,
    GraphTemplate,
    ValueType,
    validate,
)

TOPOLOGIES = ("path", "grid", "small-world", "preferential-attachment")


@dataclass(frozen=True)
class AttrSpec:
    name: str
    value_type: ValueType
    element: ElementClass = VERTEX
    kind: AttrKind = AttrKind.NORMAL
    value: object = None
    sparsity: float = 0.5
    max_values: int = 2

    def schema(self) -> AttributeSchema:
        return AttributeSchema(self.name, self.value_type, self.kind, self.value)


def traceroute_attrs(sparsity: float = 0.3) -> tuple:
    """Seven vertex and seven edge attributes covering every value type."""
    v, e = VERTEX, EDGE
    f, i, b, s = ValueType.FLOAT, ValueType.INTEGER, ValueType.BOOLEAN, ValueType.STRING
    return (
        AttrSpec("dest_ip", s, v, sparsity=sparsity),
        AttrSpec("is_dest", b, v, sparsity=sparsity, max_values=1),
        AttrSpec("hop_count", i, v, sparsity=sparsity),
        AttrSpec("rtt", f, v, sparsity=sparsity),
        AttrSpec("ttl", i, v, AttrKind.DEFAULT, 64, sparsity=sparsity / 3),
        AttrSpec("responsive", b, v, sparsity=sparsity, max_values=1),
        AttrSpec("asn", s, v, sparsity=sparsity / 3, max_values=1),
        AttrSpec("latency", f, e, sparsity=sparsity),
        AttrSpec("bandwidth", f, e, sparsity=sparsity),
        AttrSpec("probes", i, e, sparsity=sparsity),
        AttrSpec("loss", b, e, sparsity=sparsity, max_values=1),
        AttrSpec("proto", s, e, AttrKind.DEFAULT, "icmp", sparsity=sparsity / 3, max_values=1),
        AttrSpec("jitter", f, e, sparsity=sparsity),
        AttrSpec("mpls", b, e, sparsity=sparsity / 3, max_values=1),
    )


@dataclass(frozen=True)
class GenSpec:
    n_vertices: int
    topology: str = "small-world"
    n_edges: int | None = None
    degree: int = 4
    rewire_p: float = 0.1
    components: int = 1
    directed: bool = False
    n_instances: int = 4
    duration: int = 7200
    start_time: int = 0
    attrs: tuple = field(default_factory=lambda: (AttrSpec("latency", ValueType.FLOAT, EDGE),))
    exists_flip: float = 0.0
    seed: int = 0


def _component_sizes(n, count, min_size):
    if count * min_size > n:
        raise InfeasibleSpecError(f"{count} components of at least {min_size} vertices exceed {n}")
    if count == 1:
        return [n]
    weights = 1.0 / np.arange(1, count + 1) ** 0.9
    spare = n - count * min_size
    extra = np.floor(spare * weights / weights.sum()).astype(int)
    extra[0] += spare - int(extra.sum())
    return (extra + min_size).tolist()


def _topology_edges(spec: GenSpec, rng) -> list[tuple[int, int]]:
    n = spec.n_vertices
    topo = spec.topology
    if topo not in TOPOLOGIES:
        raise InfeasibleSpecError(f"unknown topology {topo!r}")
    if topo == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif topo == "grid":
        rows = max(d for d in range(1, math.isqrt(n) + 1) if n % d == 0)
        cols = n // rows
        edges = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    edges.append((v, v + 1))
                if r + 1 < rows:
                    edges.append((v, v + cols))
    else:
        k = spec.degree
        if topo == "small-world":
            if spec.n_edges is not None:
                if (2 * spec.n_edges) % n:
                    raise InfeasibleSpecError(f"small-world cannot have {spec.n_edges} edges on {n} vertices")
                k = 2 * spec.n_edges // n
            if k < 2 or k % 2:
                raise InfeasibleSpecError(f"small-world degree must be even and >= 2, got {k}")
            sizes = _component_sizes(n, spec.components, k + 1)
        else:
            m = max(1, k // 2)
            sizes = _component_sizes(n, spec.components, m + 1)
        edges = []
        offset = 0
        for size in sizes:
            sub_seed = int(rng.integers(2**31))
            if topo == "small-world":
                g = nx.watts_strogatz_graph(size, k, spec.rewire_p, seed=sub_seed)
            else:
                g = nx.barabasi_albert_graph(size, m, seed=sub_seed)
            edges.extend(sorted((offset + min(u, v), offset + max(u, v)) for u, v in g.edges()))
            offset += size
    if spec.n_edges is not None and len(edges) != spec.n_edges:
        raise InfeasibleSpecError(
            f"{topo} on {n} vertices yields {len(edges)} edges, not {spec.n_edges}"
        )
    return edges


def _draw_values(vtype: ValueType, count: int, rng):
    if vtype is ValueType.FLOAT:
        return np.round(rng.lognormal(2.0, 0.8, count), 3)
    if vtype is ValueType.INTEGER:
        return rng.integers(0, 1000, count)
    if vtype is ValueType.BOOLEAN:
        return rng.random(count) < 0.5
    out = np.empty(count, dtype=object)
    out[:] = [f"s{x}" for x in rng.integers(0, 64, count).tolist()]
    return out


def _draw_column(spec: AttrSpec, ids: np.ndarray, rng) -> AttrColumn:
    mask = rng.random(len(ids)) < spec.sparsity
    chosen = ids[mask]
    counts = rng.integers(1, spec.max_values + 1, len(chosen))
    ptr = np.zeros(len(chosen) + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return AttrColumn(chosen, ptr, _draw_values(spec.value_type, int(ptr[-1]), rng))


def generate(spec: GenSpec) -> Collection:
    """Build a collection from ``spec``; the result always passes ``validate``."""
    if spec.n_vertices < 1:
        raise InfeasibleSpecError("need at least one vertex")
    rng = np.random.default_rng(spec.seed)
    edges = _topology_edges(spec, rng)
    if spec.directed:
        flip = rng.random(len(edges)) < 0.5
        edges = [(d, s) if f else (s, d) for (s, d), f in zip(edges, flip.tolist())]

    attrs = list(spec.attrs)
    if spec.exists_flip > 0:
        for element in (VERTEX, EDGE):
            attrs.append(
                AttrSpec(EXISTS_ATTR, ValueType.BOOLEAN, element, AttrKind.DEFAULT, True, spec.exists_flip, 1)
            )
    vschema = [a.schema() for a in attrs if a.element is VERTEX]
    eschema = [a.schema() for a in attrs if a.element is EDGE]
    template = GraphTemplate.build(
        range(spec.n_vertices),
        [(i, s, d) for i, (s, d) in enumerate(edges)],
        spec.directed,
        vschema,
        eschema,
    )
    ids = {VERTEX: template.vertex_ids, EDGE: template.edge_ids}
    instances = []
    for t in range(spec.n_instances):
        start = spec.start_time + t * spec.duration
        cols = {VERTEX: {}, EDGE: {}}
        for a in attrs:
            if a.kind is AttrKind.CONSTANT:
                continue
            col = _draw_column(a, ids[a.element], rng)
            if a.name == EXISTS_ATTR:
                col = AttrColumn(col.ids, np.arange(len(col.ids) + 1), np.zeros(len(col.ids), dtype=bool))
            cols[a.element][a.name] = col
        instances.append(GraphInstance(start, start + spec.duration, cols[VERTEX], cols[EDGE]))
    collection = Collection(template, instances)
    problems = validate(collection)
    if problems:
        raise InfeasibleSpecError(f"generated collection is invalid: {problems[:3]}")
    return collection


def bench_spec(seed: int = 0, **overrides) -> GenSpec:
    """Default benchmark collection: 10,000 vertices, 20,000 edges, 40 instances."""
    params = dict(
        n_vertices=10_000,
        topology="small-world",
        degree=4,
        rewire_p=0.1,
        components=20,
        n_instances=40,
        duration=7200,
        attrs=traceroute_attrs(),
        seed=seed,
    )
    params.update(overrides)
    return GenSpec(**params)
