"""Temporal path traversal: follow a tagged object across instances.

Sequentially dependent. Vertices carry parallel multi-valued sighting
attributes, ``plate`` (what was seen) and ``seen_at`` (when). Starting from
an initial location, every timestep searches outward for sightings of the
target value:

* superstep 1 of timestep 1 starts at the initial location;
* superstep 1 of a later timestep starts at the latest sighting this
  subgraph passed on from the previous timestep (largest timestamp, ties to
  the smallest vertex id);
* later supersteps continue from vertices handed over by neighbouring
  subgraphs.

The search is depth limited: it goes at most ``search_depth`` hops past the
root or past the latest sighting on the way, whichever is nearer. Crossing a
remote edge sends the remote vertex and the remaining depth to its subgraph.
Every newly found sighting is passed on to the same subgraph's next
timestep, and each Compute call votes to halt.
"""

from __future__ import annotations

import numpy as np

from ..engine import Application, ComputeContext, Pattern
from ..errors import UnknownVertexError
from .common import locate, pack, unpack

START, SEARCH, LOC = 1, 2, 3


class Track(Application):
    pattern = Pattern.SEQUENTIALLY_DEPENDENT

    def __init__(self, target: str, search_depth: int = 3, plate_attr: str = "plate", time_attr: str = "seen_at"):
        if search_depth < 0:
            raise ValueError("search_depth must be >= 0")
        self.target = target
        self.search_depth = search_depth
        self.plate_attr = plate_attr
        self.time_attr = time_attr
        self.vertex_attrs = (plate_attr, time_attr)

    @staticmethod
    def inputs(deployment, initial_location: int) -> dict:
        return {locate(deployment, initial_location): [pack(START, [], extra=initial_location)]}

    def sighting(self, sgi, v) -> int | None:
        """Latest time ``v`` saw the target in this instance, or ``None``."""
        plates = sgi.vertex(v, self.plate_attr)
        if self.target not in plates:
            return None
        times = sgi.vertex(v, self.time_attr)
        hits = [int(t) for p, t in zip(plates, times) if p == self.target]
        return max(hits) if hits else None

    def compute(self, ctx: ComputeContext) -> None:
        sgi = ctx.subgraph
        tpl = sgi.template
        st = ctx.state
        depth = self.search_depth
        if ctx.superstep == 1:
            st["budget"] = {}
            st["found"] = {}
            st["sent"] = {}
            ctx.output(st["found"])
        budget, found = st["budget"], st["found"]

        roots = []
        if ctx.superstep == 1:
            latest = None
            for m in ctx.messages:
                kind, extra, ids, vals = unpack(m.payload, np.int64)
                if kind == START:
                    if extra not in tpl:
                        raise UnknownVertexError(extra)
                    roots.append((extra, depth))
                elif kind == LOC:
                    for v, ts in zip(ids.tolist(), vals.tolist()):
                        if latest is None or (ts, -v) > (latest[1], -latest[0]):
                            latest = (v, ts)
            if latest is not None:
                roots.append((latest[0], depth))
        else:
            for m in ctx.messages:
                kind, _, ids, vals = unpack(m.payload, np.int64)
                if kind == SEARCH:
                    roots.extend(zip(ids.tolist(), vals.tolist()))

        stack = []
        new_found = []

        def visit(v, b):
            if not sgi.vertex_exists(v):
                return
            ts = self.sighting(sgi, v)
            eff = depth if ts is not None else b
            if eff > budget.get(v, -1):
                budget[v] = eff
                stack.append(v)
            if ts is not None and v not in found:
                found[v] = ts
                new_found.append(v)

        for v, b in roots:
            visit(v, b)
        remote: dict = {}
        while stack:
            v = stack.pop()
            b = budget[v]
            if b == 0:
                continue
            for e, u in tpl.out_edges[v]:
                if sgi.edge_exists(e):
                    visit(u, b - 1)
            for r in tpl.out_remote.get(v, ()):
                if sgi.edge_exists(r.edge_id):
                    key = (r.target_subgraph, r.remote_vertex)
                    if b - 1 > st["sent"].get(key, -1):
                        st["sent"][key] = b - 1
                        remote.setdefault(r.target_subgraph, {})[r.remote_vertex] = b - 1

        for target in sorted(remote):
            box = remote[target]
            ctx.send_to_subgraph(target, pack(SEARCH, list(box), list(box.values()), dtype=np.int64))
        if new_found and not ctx.is_last_timestep:
            for v in sorted(new_found):
                ctx.send_to_next_timestep(pack(LOC, [v], [found[v]], dtype=np.int64))
        ctx.vote_to_halt()


def sightings(result) -> dict:
    """``{timestep: {vertex: timestamp}}`` over all subgraphs."""
    out = {}
    for t in sorted(result.outputs):
        merged = {}
        for sgid in sorted(result.outputs[t]):
            merged.update(result.outputs[t][sgid])
        out[t] = merged
    return out


def track(result) -> list[tuple[int, int, int]]:
    """``(timestep, vertex, timestamp)`` of the latest sighting in each timestep that has one."""
    out = []
    for t, found in sightings(result).items():
        if found:
            v, ts = max(found.items(), key=lambda kv: (kv[1], -kv[0]))
            out.append((t, v, ts))
    return out
