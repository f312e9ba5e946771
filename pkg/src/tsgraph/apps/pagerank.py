"""PageRank on every instance, considering only the edges active in it.

Independent pattern. An edge is active in an instance when it exists there
and its activity attribute (latency by default) has at least one value.
Ranks cover the vertices that exist in the instance; dangling mass is spread
uniformly over them, and an instance without active edges ends up uniform.

Superstep layout per instance:

1. broadcast the local vertex count; probe remote endpoints for existence.
2. answer probes.
3. set ranks to ``1/N``, send the first round of contributions.
3+i. finish iteration ``i``; the last one outputs and halts.

Undirected edges contribute in both directions; parallel edges count once
each.
"""

from __future__ import annotations

import numpy as np

from ..engine import Application, ComputeContext, Pattern
from .common import collect, mean_weight, pack, unpack

COUNT, PROBE, ALIVE, CONTRIB, DANGLING = 1, 2, 3, 4, 5


class PageRank(Application):
    pattern = Pattern.INDEPENDENT

    def __init__(self, iterations: int = 30, damping: float = 0.85, activity_attr: str = "latency"):
        if iterations < 0:
            raise ValueError("iterations must be >= 0")
        self.iterations = iterations
        self.damping = damping
        self.activity_attr = activity_attr
        self.edge_attrs = (activity_attr,)

    def _active(self, sgi, e) -> bool:
        return sgi.edge_exists(e) and mean_weight(sgi.edge(e, self.activity_attr)) is not None

    def compute(self, ctx: ComputeContext) -> None:
        sgi = ctx.subgraph
        tpl = sgi.template
        st = ctx.state
        step = ctx.superstep

        if step == 1:
            alive = [v for v in tpl.vertices.tolist() if sgi.vertex_exists(v)]
            st["alive"] = alive
            for target in ctx.subgraph_ids:
                if alive:
                    ctx.send_to_subgraph(target, pack(COUNT, [], extra=len(alive)))
            alive_set = set(alive)
            probes: dict = {}
            candidates = []
            for u, edges in tpl.out_remote.items():
                if u not in alive_set:
                    continue
                for r in edges:
                    if self._active(sgi, r.edge_id):
                        candidates.append(r)
                        probes.setdefault(r.target_subgraph, set()).add(r.remote_vertex)
            st["candidates"] = candidates
            for target in sorted(probes):
                ctx.send_to_subgraph(target, pack(PROBE, sorted(probes[target])))
            return

        if step == 2:
            st["n"] = 0
            for m in ctx.messages:
                kind, extra, ids, _ = unpack(m.payload)
                if kind == COUNT:
                    st["n"] += extra
                elif kind == PROBE:
                    here = [v for v in ids.tolist() if sgi.vertex_exists(v)]
                    ctx.send_to_subgraph(m.origin.subgraph_id, pack(ALIVE, here))
            return

        if step == 3:
            self._setup(ctx)
        else:
            self._finish_iteration(ctx)
        if step - 3 == self.iterations:
            verts = st["alive"]
            ctx.output(dict(zip(verts, st["rank"].tolist())))
            ctx.vote_to_halt()
            return
        self._scatter(ctx)

    def _setup(self, ctx):
        sgi, st = ctx.subgraph, ctx.state
        tpl = sgi.template
        remote_alive = set()
        for m in ctx.messages:
            kind, _, ids, _ = unpack(m.payload)
            if kind == ALIVE:
                remote_alive.update((m.origin.subgraph_id, v) for v in ids.tolist())
        verts = st["alive"]
        index = {v: i for i, v in enumerate(verts)}
        st["index"] = index
        src, dst = [], []
        for e, s, d in zip(tpl.edge_ids.tolist(), tpl.edge_src.tolist(), tpl.edge_dst.tolist()):
            if s in index and d in index and self._active(sgi, e):
                src.append(index[s])
                dst.append(index[d])
                if not tpl.directed and s != d:
                    src.append(index[d])
                    dst.append(index[s])
        n_local = len(verts)
        st["src"] = np.array(src, dtype=np.int64)
        st["dst"] = np.array(dst, dtype=np.int64)
        deg = np.bincount(st["src"], minlength=n_local).astype(np.float64)
        remote: dict = {}
        for r in st["candidates"]:
            if (r.target_subgraph, r.remote_vertex) in remote_alive:
                rows, ids = remote.setdefault(r.target_subgraph, ([], []))
                rows.append(index[r.local_vertex])
                ids.append(r.remote_vertex)
                deg[index[r.local_vertex]] += 1
        st["remote"] = {}
        for target in sorted(remote):
            rows, ids = remote[target]
            uniq, inverse = np.unique(np.array(ids, dtype=np.int64), return_inverse=True)
            st["remote"][target] = (np.array(rows, dtype=np.int64), uniq, inverse)
        st["deg"] = deg
        n = st["n"]
        st["rank"] = np.full(n_local, 1.0 / n if n else 0.0)

    def _scatter(self, ctx):
        st = ctx.state
        rank, deg = st["rank"], st["deg"]
        share = np.divide(rank, deg, out=np.zeros_like(rank), where=deg > 0)
        # bincount returns ints for empty input even with float weights
        st["local_in"] = np.bincount(st["dst"], weights=share[st["src"]], minlength=len(rank)).astype(np.float64)
        for target, (rows, uniq, inverse) in st["remote"].items():
            sums = np.bincount(inverse, weights=share[rows], minlength=len(uniq)).astype(np.float64)
            ctx.send_to_subgraph(target, pack(CONTRIB, uniq, sums))
        dangling = float(rank[deg == 0].sum())
        if dangling:
            for target in ctx.subgraph_ids:
                ctx.send_to_subgraph(target, pack(DANGLING, [0], [dangling]))

    def _finish_iteration(self, ctx):
        st = ctx.state
        incoming = st["local_in"].copy()
        index = st["index"]
        dangling = 0.0
        for m in ctx.messages:
            kind, _, ids, vals = unpack(m.payload)
            if kind == CONTRIB:
                for v, x in zip(ids.tolist(), vals.tolist()):
                    incoming[index[v]] += x
            elif kind == DANGLING:
                dangling += float(vals[0])
        n = st["n"]
        if not n:
            return
        d = self.damping
        st["rank"] = (1.0 - d) / n + d * (incoming + dangling / n)


def ranks(result, timestep: int) -> dict:
    """``{vertex: rank}`` for one instance."""
    return collect(result.outputs.get(timestep, {}))
