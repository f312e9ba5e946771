"""Vertex-disjoint partitioning of a template and subgraph discovery.

The partitioner is a seeded multi-source region grower:

1. ``n`` seeds are picked by farthest-point sampling on hop distance
   (unreachable vertices count as infinitely far, so every connected component
   gets a seed before any component gets two).
2. Regions grow one vertex at a time, always expanding the currently smallest
   region from its BFS frontier. A region whose frontier is exhausted restarts
   from the lowest unassigned vertex. Sizes therefore never differ by more
   than one after growth.
3. One refinement pass visits vertices in id order and moves each boundary
   vertex to the neighbouring partition that reduces the cut most, if the
   balance bound still holds; otherwise it tries the best size-preserving
   swap with a vertex of that partition within two hops.

A subgraph is a connected component of a partition's local edges, with edge
direction ignored. Subgraph ids are ``(partition_id << 32) | k`` where ``k``
orders components by their smallest vertex id, so ids are globally unique
and need no coordination between partitions.
"""

from __future__ import annotations

import heapq
import math
import struct
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import PartitionError
from .model import GraphTemplate

IMBALANCE_TOL = 0.05
SUBGRAPH_SHIFT = 32


def make_subgraph_id(partition_id: int, local_index: int) -> int:
    return (partition_id << SUBGRAPH_SHIFT) | local_index


def subgraph_partition(subgraph_id: int) -> int:
    return subgraph_id >> SUBGRAPH_SHIFT


@dataclass(frozen=True, eq=False)
class Partition:
    partition_id: int
    vertices: np.ndarray
    local_edges: np.ndarray
    remote_edges: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return np.union1d(self.local_edges, self.remote_edges)

    def __repr__(self):
        return (
            f"Partition({self.partition_id}, |V|={len(self.vertices)}, "
            f"|L|={len(self.local_edges)}, |R|={len(self.remote_edges)})"
        )


@dataclass(frozen=True)
class RemoteEdge:
    """A remote edge seen from the partition that stores it.

    ``forward`` is true when the local vertex is the edge's source.
    """

    edge_id: int
    local_vertex: int
    remote_vertex: int
    forward: bool
    target_subgraph: int = -1
    target_partition: int = -1


@dataclass(frozen=True, eq=False)
class SubgraphTemplate:
    subgraph_id: int
    partition_id: int
    vertices: np.ndarray
    edge_ids: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    remote_edges: tuple = ()
    directed: bool = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids) + len(self.remote_edges)

    @cached_property
    def vertex_set(self) -> frozenset:
        return frozenset(self.vertices.tolist())

    def __contains__(self, vertex_id) -> bool:
        return vertex_id in self.vertex_set

    @cached_property
    def all_edge_ids(self) -> np.ndarray:
        """Sorted ids of every edge whose values this subgraph stores."""
        remote = np.array([r.edge_id for r in self.remote_edges], dtype=np.int64)
        return np.unique(np.concatenate([self.edge_ids, remote]))

    @cached_property
    def out_edges(self) -> dict:
        """``vertex -> [(edge_id, neighbour)]`` over local edges, honouring direction."""
        adj = {v: [] for v in self.vertices.tolist()}
        for e, s, d in zip(self.edge_ids.tolist(), self.edge_src.tolist(), self.edge_dst.tolist()):
            adj[s].append((e, d))
            if not self.directed and s != d:
                adj[d].append((e, s))
        return adj

    @cached_property
    def out_remote(self) -> dict:
        """``vertex -> [RemoteEdge]`` for remote edges traversable from the vertex."""
        adj: dict = {}
        for r in self.remote_edges:
            if self.directed and not r.forward:
                continue
            adj.setdefault(r.local_vertex, []).append(r)
        return adj

    def __repr__(self):
        return (
            f"SubgraphTemplate({self.subgraph_id:#x}, |V|={self.n_vertices}, "
            f"|L|={len(self.edge_ids)}, |R|={len(self.remote_edges)})"
        )


def _undirected_csr(n, src_idx, dst_idx):
    """Neighbour lists (with multiplicity, no self loops) over vertex indices."""
    keep = src_idx != dst_idx
    a = np.concatenate([src_idx[keep], dst_idx[keep]])
    b = np.concatenate([dst_idx[keep], src_idx[keep]])
    order = np.lexsort((b, a))
    a, b = a[order], b[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, a + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, b


def _hop_distances(n, src_idx, dst_idx, source):
    graph = coo_matrix((np.ones(len(src_idx)), (src_idx, dst_idx)), shape=(n, n)).tocsr()
    return shortest_path(graph, method="D", directed=False, unweighted=True, indices=source)


def _pick_seeds(n_vertices, src_idx, dst_idx, n, rng):
    start = int(rng.integers(n_vertices))
    dist = _hop_distances(n_vertices, src_idx, dst_idx, start)
    seeds = [int(np.argmax(dist))]
    nearest = _hop_distances(n_vertices, src_idx, dst_idx, seeds[0])
    nearest[seeds[0]] = -1
    while len(seeds) < n:
        nxt = int(np.argmax(nearest))
        seeds.append(nxt)
        nearest = np.minimum(nearest, _hop_distances(n_vertices, src_idx, dst_idx, nxt))
        nearest[seeds] = -1
    return seeds


def _grow(n_vertices, indptr, nbrs, seeds):
    n = len(seeds)
    cap = math.ceil(n_vertices / n)
    part = np.full(n_vertices, -1, dtype=np.int64)
    frontiers = [deque() for _ in range(n)]
    sizes = [0] * n
    assigned = 0

    def claim(r, v):
        nonlocal assigned
        part[v] = r
        sizes[r] += 1
        assigned += 1
        frontiers[r].extend(nbrs[indptr[v] : indptr[v + 1]].tolist())

    for r, s in enumerate(seeds):
        claim(r, s)
    heap = [(1, r) for r in range(n) if sizes[r] < cap]
    heapq.heapify(heap)
    next_free = 0
    while assigned < n_vertices:
        _, r = heapq.heappop(heap)
        frontier = frontiers[r]
        v = -1
        while frontier:
            cand = frontier.popleft()
            if part[cand] < 0:
                v = cand
                break
        if v < 0:
            while part[next_free] >= 0:
                next_free += 1
            v = next_free
        claim(r, v)
        if sizes[r] < cap:
            heapq.heappush(heap, (sizes[r], r))
    return part


def _refine(part, n, indptr, nbrs, bound):
    sizes = np.bincount(part, minlength=n)

    def counts(v):
        return np.bincount(part[nbrs[indptr[v] : indptr[v + 1]]], minlength=n)

    def balanced_after(src, dst):
        trial = sizes.copy()
        trial[src] -= 1
        trial[dst] += 1
        return trial.max() - trial.min() <= bound

    for v in range(len(part)):
        p = part[v]
        c = counts(v)
        gains = c - c[p]
        gains[p] = 0
        q = int(np.argmax(gains))
        if gains[q] <= 0:
            continue
        if balanced_after(p, q):
            part[v] = q
            sizes[p] -= 1
            sizes[q] += 1
            continue
        one_hop = nbrs[indptr[v] : indptr[v + 1]]
        two_hop = [one_hop] + [nbrs[indptr[u] : indptr[u + 1]] for u in one_hop.tolist()]
        candidates = np.unique(np.concatenate(two_hop))
        candidates = candidates[part[candidates] == q]
        best, best_u = 0, -1
        for u in candidates.tolist():
            cu = counts(u)
            link = int(np.count_nonzero(nbrs[indptr[u] : indptr[u + 1]] == v))
            combined = gains[q] + (cu[p] - cu[q]) - 2 * link
            if combined > best:
                best, best_u = combined, u
        if best_u >= 0:
            part[v] = q
            part[best_u] = p
    return part


def partition(
    template: GraphTemplate, n: int, seed: int = 0, imbalance_tol: float = IMBALANCE_TOL
) -> list[Partition]:
    """Split ``template`` into ``n`` vertex-disjoint partitions.

    Partition sizes differ by at most ``ceil(|V| * imbalance_tol)`` (and at
    least one vertex of slack is always allowed).
    """
    n_vertices = template.n_vertices
    if n < 1:
        raise PartitionError("need at least one partition")
    if n > n_vertices:
        raise PartitionError("more partitions than vertices")
    vids = template.vertex_ids
    order = np.argsort(vids, kind="stable")
    sorted_vids = vids[order]
    src_idx = np.searchsorted(sorted_vids, template.edge_src)
    dst_idx = np.searchsorted(sorted_vids, template.edge_dst)

    if n == 1:
        part = np.zeros(n_vertices, dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        indptr, nbrs = _undirected_csr(n_vertices, src_idx, dst_idx)
        seeds = _pick_seeds(n_vertices, src_idx, dst_idx, n, rng)
        part = _grow(n_vertices, indptr, nbrs, seeds)
        bound = max(1, math.ceil(n_vertices * imbalance_tol))
        part = _refine(part, n, indptr, nbrs, bound)

    src_part = part[src_idx]
    dst_part = part[dst_idx]
    local = src_part == dst_part
    out = []
    for p in range(n):
        vertices = sorted_vids[part == p]
        local_edges = template.edge_ids[local & (src_part == p)]
        if template.directed:
            remote_mask = ~local & (src_part == p)
        else:
            remote_mask = ~local & ((src_part == p) | (dst_part == p))
        out.append(
            Partition(p, vertices, np.sort(local_edges), np.sort(template.edge_ids[remote_mask]))
        )
    return out


def find_subgraphs(template: GraphTemplate, part: Partition) -> list[SubgraphTemplate]:
    """Connected components of a partition's local edges, as subgraph templates.

    Remote edges are attached but not yet routed (targets are -1); see
    :func:`resolve_remote_edges`.
    """
    vertices = np.sort(part.vertices)
    ends = template.edge_endpoints
    le = part.local_edges.tolist()
    src = np.array([ends[e][0] for e in le], dtype=np.int64)
    dst = np.array([ends[e][1] for e in le], dtype=np.int64)
    nv = len(vertices)
    si = np.searchsorted(vertices, src)
    di = np.searchsorted(vertices, dst)
    graph = coo_matrix((np.ones(len(si)), (si, di)), shape=(nv, nv))
    _, labels = connected_components(graph, directed=False)
    # relabel so components are ordered by their smallest vertex id
    first_seen = {}
    for idx, lab in enumerate(labels.tolist()):
        first_seen.setdefault(lab, len(first_seen))
    labels = np.array([first_seen[lab] for lab in labels.tolist()], dtype=np.int64)
    n_comp = len(first_seen)

    edge_label = labels[si] if len(si) else np.empty(0, np.int64)
    le_arr = np.array(le, dtype=np.int64)
    remote_by_comp: list[list] = [[] for _ in range(n_comp)]
    vpos = {v: i for i, v in enumerate(vertices.tolist())}
    for e in part.remote_edges.tolist():
        s, d = ends[e]
        if s in vpos:
            remote_by_comp[labels[vpos[s]]].append(RemoteEdge(e, s, d, True))
        elif d in vpos:
            remote_by_comp[labels[vpos[d]]].append(RemoteEdge(e, d, s, False))
    out = []
    for k in range(n_comp):
        emask = edge_label == k
        out.append(
            SubgraphTemplate(
                make_subgraph_id(part.partition_id, k),
                part.partition_id,
                vertices[labels == k],
                le_arr[emask],
                src[emask],
                dst[emask],
                tuple(sorted(remote_by_comp[k], key=lambda r: (r.edge_id, r.local_vertex))),
                template.directed,
            )
        )
    return out


def resolve_remote_edges(subgraphs_by_partition) -> dict:
    """Route every remote edge to the subgraph owning its far endpoint.

    Returns ``{(partition_id, edge_id, local_vertex): (target_subgraph, target_partition)}``.
    """
    owner = {}
    for sgs in subgraphs_by_partition:
        for sg in sgs:
            for v in sg.vertices.tolist():
                owner[v] = (sg.subgraph_id, sg.partition_id)
    out = {}
    for sgs in subgraphs_by_partition:
        for sg in sgs:
            for r in sg.remote_edges:
                try:
                    out[(sg.partition_id, r.edge_id, r.local_vertex)] = owner[r.remote_vertex]
                except KeyError:
                    raise PartitionError(f"orphan vertex {r.remote_vertex}") from None
    return out


def annotate(subgraphs_by_partition, routes) -> list[list[SubgraphTemplate]]:
    """Copies of the subgraphs with routed remote edges."""
    out = []
    for sgs in subgraphs_by_partition:
        row = []
        for sg in sgs:
            remote = tuple(
                RemoteEdge(
                    r.edge_id,
                    r.local_vertex,
                    r.remote_vertex,
                    r.forward,
                    *routes[(sg.partition_id, r.edge_id, r.local_vertex)],
                )
                for r in sg.remote_edges
            )
            row.append(
                SubgraphTemplate(
                    sg.subgraph_id,
                    sg.partition_id,
                    sg.vertices,
                    sg.edge_ids,
                    sg.edge_src,
                    sg.edge_dst,
                    remote,
                    sg.directed,
                )
            )
        out.append(row)
    return out


def build_subgraphs(template: GraphTemplate, partitions) -> list[list[SubgraphTemplate]]:
    """Subgraphs of every partition with remote edges routed."""
    raw = [find_subgraphs(template, p) for p in partitions]
    return annotate(raw, resolve_remote_edges(raw))


PMAP_MAGIC = b"TSPMAP\x00\x00"
PMAP_VERSION = 1
PMAP_DTYPE = np.dtype([("vid", "<i8"), ("pid", "<i4"), ("sgid", "<i8")])


def partition_table(subgraphs_by_partition) -> np.ndarray:
    rows = [
        (v, sg.partition_id, sg.subgraph_id)
        for sgs in subgraphs_by_partition
        for sg in sgs
        for v in sg.vertices.tolist()
    ]
    table = np.array(rows, dtype=PMAP_DTYPE)
    return np.sort(table, order="vid")


def write_partition_map(path, table: np.ndarray) -> None:
    """Binary ``vid -> (partition, subgraph)`` table.

    Layout: 8-byte magic, u32 version, u64 row count, then packed
    little-endian rows of (i64 vid, i32 partition, i64 subgraph).
    """
    table = np.asarray(table, dtype=PMAP_DTYPE)
    with open(path, "wb") as fh:
        fh.write(PMAP_MAGIC)
        fh.write(struct.pack("<IQ", PMAP_VERSION, len(table)))
        fh.write(table.tobytes())


def read_partition_map(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != PMAP_MAGIC:
        raise PartitionError("not a partition map")
    version, count = struct.unpack_from("<IQ", data, 8)
    if version != PMAP_VERSION:
        raise PartitionError(f"unsupported partition map version {version}")
    body = data[20:]
    if len(body) != count * PMAP_DTYPE.itemsize:
        raise PartitionError("truncated partition map")
    return np.frombuffer(body, dtype=PMAP_DTYPE).copy()
