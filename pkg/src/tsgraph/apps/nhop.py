"""Latency histogram of the vertices within N hops of a source.

Eventually dependent. Each instance runs a bounded breadth-first search
from the source; a vertex's key is ``(hops, latency)`` compared
lexicographically, so it is reached by a minimum-hop path and, among those,
the one with the lowest summed latency. Edges without latency values or
that do not exist are not traversed. The source itself is not counted.

Every Compute call reports its subgraph's current histogram to Merge. Merge
keeps the last report per (subgraph, instance), sums them, and reduces the
per-subgraph composites onto the lowest subgraph id.
"""

from __future__ import annotations

import heapq
import math
import struct

import numpy as np

from ..engine import Application, ComputeContext, MergeContext, Pattern
from ..errors import UnknownVertexError
from .common import locate, mean_weight, pack, unpack

N_BUCKETS = 17
HOPS, SOURCE, HIST, TOTAL = 1, 2, 3, 4


def bucket_of(latency: float) -> int:
    """Bucket 0 is ``[0, 1)``, bucket ``i`` is ``[2**(i-1), 2**i)`` up to ``i=15``, 16 is overflow."""
    if latency < 1.0:
        return 0
    return min(int(math.floor(math.log2(latency))) + 1, N_BUCKETS - 1)


def bucket_edges() -> list[float]:
    return [0.0] + [float(2**i) for i in range(16)] + [math.inf]


def histogram(latencies) -> np.ndarray:
    counts = np.zeros(N_BUCKETS, dtype=np.int64)
    for x in latencies:
        counts[bucket_of(x)] += 1
    return counts


class NHop(Application):
    pattern = Pattern.EVENTUALLY_DEPENDENT

    def __init__(self, n_hops: int = 6, weight_attr: str = "latency"):
        if n_hops < 1:
            raise ValueError("n_hops must be >= 1")
        self.n_hops = n_hops
        self.weight_attr = weight_attr
        self.edge_attrs = (weight_attr,)

    @staticmethod
    def inputs(deployment, source: int) -> dict:
        return {locate(deployment, source): [pack(SOURCE, [], extra=source)]}

    def compute(self, ctx: ComputeContext) -> None:
        sgi = ctx.subgraph
        tpl = sgi.template
        st = ctx.state
        if ctx.superstep == 1:
            st["key"] = {}
            st["counts"] = np.zeros(N_BUCKETS, dtype=np.int64)
            st["source"] = None
        key = st["key"]
        seeds = {}

        def offer(v, k):
            if k < key.get(v, (math.inf, math.inf)) and k < seeds.get(v, (math.inf, math.inf)):
                if sgi.vertex_exists(v):
                    seeds[v] = k

        for m in ctx.messages:
            kind, extra, ids, vals = unpack(m.payload)
            if kind == SOURCE:
                if extra not in tpl:
                    raise UnknownVertexError(extra)
                st["source"] = extra
                offer(extra, (0, 0.0))
            else:
                for v, lat in zip(ids.tolist(), vals.tolist()):
                    offer(v, (extra, lat))

        weights = st.setdefault("weight", {})

        def weight(e):
            if e not in weights:
                weights[e] = mean_weight(sgi.edge(e, self.weight_attr)) if sgi.edge_exists(e) else None
            return weights[e]

        changed = set(seeds)
        key.update(seeds)
        heap = [(k, v) for v, k in seeds.items()]
        heapq.heapify(heap)
        remote: dict = {}
        while heap:
            k, u = heapq.heappop(heap)
            if k > key[u]:
                continue
            hops, lat = k
            if hops >= self.n_hops:
                continue
            for e, v in tpl.out_edges[u]:
                w = weight(e)
                if w is None:
                    continue
                nk = (hops + 1, lat + w)
                if nk < key.get(v, (math.inf, math.inf)) and sgi.vertex_exists(v):
                    key[v] = nk
                    changed.add(v)
                    heapq.heappush(heap, (nk, v))
            for r in tpl.out_remote.get(u, ()):
                w = weight(r.edge_id)
                if w is None:
                    continue
                nk = (hops + 1, lat + w)
                box = remote.setdefault(r.target_subgraph, {})
                if nk < box.get(r.remote_vertex, (math.inf, math.inf)):
                    box[r.remote_vertex] = nk

        for target in sorted(remote):
            by_hops: dict = {}
            for v, (h, lat) in remote[target].items():
                by_hops.setdefault(h, {})[v] = lat
            for h in sorted(by_hops):
                box = by_hops[h]
                ctx.send_to_subgraph(target, pack(HOPS, list(box), list(box.values()), extra=h))

        if changed:
            src = st["source"]
            counts = histogram(lat for v, (h, lat) in key.items() if v != src)
            st["counts"] = counts
            ctx.send_to_merge(pack(HIST, [], extra=0) + counts.tobytes())
        ctx.output(st["counts"])
        ctx.vote_to_halt()

    def merge(self, ctx: MergeContext) -> None:
        if ctx.superstep == 1:
            last: dict = {}
            for m in ctx.messages:
                slot = m.origin.timestep
                if slot not in last or m.origin.superstep >= last[slot].origin.superstep:
                    last[slot] = m
            total = np.zeros(N_BUCKETS, dtype=np.int64)
            for m in last.values():
                total += _counts(m.payload)
            if total.any():
                ctx.send_to_subgraph(ctx.subgraph_ids[0], pack(TOTAL, [], extra=0) + total.tobytes())
            if ctx.subgraph_id == ctx.subgraph_ids[0]:
                ctx.output(np.zeros(N_BUCKETS, dtype=np.int64))
        elif ctx.subgraph_id == ctx.subgraph_ids[0]:
            total = np.zeros(N_BUCKETS, dtype=np.int64)
            for m in ctx.messages:
                total += _counts(m.payload)
            ctx.output(total)
        ctx.vote_to_halt()


def _counts(payload: bytes) -> np.ndarray:
    at = struct.calcsize("<Bqq")
    return np.frombuffer(payload, dtype=np.int64, count=N_BUCKETS, offset=at)


def composite(result) -> np.ndarray:
    """The merged histogram of a run."""
    if not result.merge_outputs:
        return np.zeros(N_BUCKETS, dtype=np.int64)
    return next(iter(result.merge_outputs.values()))


def per_instance(result) -> dict:
    """``{timestep: histogram}`` summed over subgraphs."""
    out = {}
    for t, outputs in result.outputs.items():
        total = np.zeros(N_BUCKETS, dtype=np.int64)
        for counts in outputs.values():
            total += counts
        out[t] = total
    return out
