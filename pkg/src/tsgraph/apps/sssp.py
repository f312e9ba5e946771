"""Single-source shortest paths over a time-series graph.

Sequentially dependent. Every timestep runs a distributed Dijkstra over
one instance: each subgraph settles what it can locally, then ships
boundary relaxations over remote edges to the owning subgraph for the next
superstep. Edge weight is the mean of the edge's latency values in that
instance; an edge with no values, or one that does not exist, is skipped.

Two aggregation modes:

* default: the reported distance after timestep ``k`` is the element-wise
  minimum over instances ``1..k`` of the per-instance distances. Each
  subgraph forwards its running minimum with ``send_to_next_timestep``.
* ``temporal=True``: distances are arrival times. The source is reached at
  the start of the first instance, an edge is weighed in the instance in
  which its traversal starts, and an arrival past the end of the current
  instance is deferred to the instance that contains it. The target must
  exist both when the traversal starts and when it arrives. This is a
  time-respecting Dijkstra that crosses instance boundaries.
"""

from __future__ import annotations

import heapq
import math

from ..engine import Application, ComputeContext, Pattern
from ..errors import UnknownVertexError
from .common import collect, locate, mean_weight, pack, unpack

RELAX, CARRY, SOURCE, DEFER = 1, 2, 3, 4


class SSSP(Application):
    pattern = Pattern.SEQUENTIALLY_DEPENDENT

    def __init__(self, weight_attr: str = "latency", temporal: bool = False):
        self.weight_attr = weight_attr
        self.edge_attrs = (weight_attr,)
        self.temporal = temporal

    @staticmethod
    def inputs(deployment, source: int) -> dict:
        """Application input delivering ``source`` to the subgraph that holds it."""
        return {locate(deployment, source): [pack(SOURCE, [], extra=source)]}

    def compute(self, ctx: ComputeContext) -> None:
        sgi = ctx.subgraph
        tpl = sgi.template
        st = ctx.state
        if ctx.superstep == 1:
            st["best"] = {}
            st["dist"] = st["best"] if self.temporal else {}
            st["weight"] = {}
            st["alive"] = {}
            ctx.output(st["best"])
        best, dist = st["best"], st["dist"]
        end = sgi.end if self.temporal else math.inf

        def alive(v):
            hit = st["alive"].get(v)
            if hit is None:
                hit = st["alive"][v] = sgi.vertex_exists(v)
            return hit

        def weight(e):
            if e not in st["weight"]:
                w = None
                if sgi.edge_exists(e):
                    w = mean_weight(sgi.edge(e, self.weight_attr))
                st["weight"][e] = w
            return st["weight"][e]

        seeds = {}
        later = {}

        def offer(v, d, deferred=False):
            # a traversal needs its target to exist now; a deferred arrival
            # is checked again in the instance it lands in
            if d >= end:
                if (deferred or alive(v)) and d < later.get(v, math.inf):
                    later[v] = d
            elif d < dist.get(v, math.inf) and d < seeds.get(v, math.inf) and alive(v):
                seeds[v] = d

        carried, offers = [], []
        for m in ctx.messages:
            kind, extra, ids, vals = unpack(m.payload)
            if kind == SOURCE:
                if extra not in tpl:
                    raise UnknownVertexError(extra)
                if not self.temporal:
                    offers.append(([extra], [0.0], False))
                    if not ctx.is_last_timestep:
                        ctx.send_to_next_timestep(m.payload)
                elif ctx.timestep == 1:
                    offers.append(([extra], [float(sgi.start)], False))
            elif kind == CARRY:
                carried.append((ids, vals))
            else:
                offers.append((ids.tolist(), vals.tolist(), kind == DEFER))
        for ids, vals in carried:
            for v, d in zip(ids.tolist(), vals.tolist()):
                if d < best.get(v, math.inf):
                    best[v] = d
        for ids, vals, deferred in offers:
            for v, d in zip(ids, vals):
                offer(v, d, deferred)

        improved = set(seeds)
        dist.update(seeds)
        heap = [(d, v) for v, d in seeds.items()]
        heapq.heapify(heap)
        remote: dict = {}
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for e, v in tpl.out_edges[u]:
                w = weight(e)
                if w is None:
                    continue
                nd = d + w
                if nd >= end:
                    offer(v, nd)
                elif nd < dist.get(v, math.inf) and alive(v):
                    dist[v] = nd
                    improved.add(v)
                    heapq.heappush(heap, (nd, v))
            for r in tpl.out_remote.get(u, ()):
                w = weight(r.edge_id)
                if w is None:
                    continue
                nd = d + w
                box = remote.setdefault(r.target_subgraph, {})
                if nd < box.get(r.remote_vertex, math.inf):
                    box[r.remote_vertex] = nd

        if not self.temporal:
            for v in improved:
                if dist[v] < best.get(v, math.inf):
                    best[v] = dist[v]

        for target in sorted(remote):
            box = remote[target]
            ctx.send_to_subgraph(target, pack(RELAX, list(box), list(box.values())))
        if not ctx.is_last_timestep:
            if later:
                ctx.send_to_next_timestep(pack(DEFER, list(later), list(later.values())))
            carry = best if ctx.superstep == 1 else {v: best[v] for v in improved if v in best}
            if carry:
                ctx.send_to_next_timestep(pack(CARRY, list(carry), list(carry.values())))
        ctx.vote_to_halt()


def distances(result, timestep: int | None = None) -> dict:
    """``{vertex: distance}`` reported after ``timestep`` (default: the last one)."""
    if not result.outputs:
        return {}
    t = max(result.outputs) if timestep is None else timestep
    return collect(result.outputs[t])
