"""Collection builders and small applications shared by the test modules."""

import math
import random

from oracles import UnionFind
from tsgraph.engine import Application, Pattern
from tsgraph.generate import AttrSpec, GenSpec, generate
from tsgraph.model import EDGE, VERTEX, AttributeSchema, AttrKind, Collection, GraphInstance, GraphTemplate, ValueType
from tsgraph.partition import find_subgraphs


def random_collection(
    seed,
    n_vertices=60,
    n_instances=4,
    directed=False,
    exists_flip=0.1,
    topology="small-world",
    components=1,
    sparsity=0.8,
    duration=20,
):
    """Small generated collection with a float ``latency`` edge attribute."""
    attrs = (AttrSpec("latency", ValueType.FLOAT, EDGE, sparsity=sparsity, max_values=2),)
    spec = GenSpec(
        n_vertices,
        topology,
        degree=4,
        components=components,
        directed=directed,
        n_instances=n_instances,
        duration=duration,
        attrs=attrs,
        exists_flip=exists_flip,
        seed=seed,
    )
    return generate(spec)


def latency_collection(vertices, edges, latencies, directed=False, span=100):
    """Hand-made collection; ``latencies[t]`` maps edge id to a list of values."""
    tpl = GraphTemplate.build(
        vertices, edges, directed, edge_schema=[AttributeSchema("latency", ValueType.FLOAT)]
    )
    insts = [
        GraphInstance.from_values(tpl, t * span, (t + 1) * span, edges={e: {"latency": v} for e, v in lat.items()})
        for t, lat in enumerate(latencies)
    ]
    return Collection(tpl, insts)


class Chatter(Application):
    """Seeded random messaging app used to exercise the engine.

    Every call logs what it received, sends a few messages to random
    subgraphs, and votes to halt at random (always from ``max_superstep`` on).
    Each decision is recorded in ``self.decisions`` so tests can recompute
    which subgraphs the engine should have invoked.
    """

    def __init__(self, seed, pattern=Pattern.INDEPENDENT, max_superstep=4, fanout=3, halt_p=0.6):
        self.seed = seed
        self.pattern = pattern
        self.max_superstep = max_superstep
        self.fanout = fanout
        self.halt_p = halt_p
        self.decisions = {}

    def _rng(self, *key):
        return random.Random(f"{self.seed}:{key}")

    def compute(self, ctx):
        key = (ctx.timestep, ctx.superstep, ctx.subgraph_id)
        rng = self._rng(*key)
        log = ctx.state.setdefault("log", [])
        log.append((ctx.superstep, tuple(m.payload for m in ctx.messages)))
        ctx.output(tuple(log))
        sent = []
        if ctx.superstep < self.max_superstep:
            for i in range(rng.randrange(self.fanout + 1)):
                target = rng.choice(ctx.subgraph_ids)
                ctx.send_to_subgraph(target, f"{ctx.subgraph_id}/{ctx.timestep}/{ctx.superstep}/{i}".encode())
                sent.append(target)
        if self.pattern is Pattern.SEQUENTIALLY_DEPENDENT and rng.random() < 0.3:
            if rng.random() < 0.5:
                ctx.send_to_next_timestep(b"next")
            else:
                ctx.send_to_subgraph_in_next_timestep(rng.choice(ctx.subgraph_ids), b"hop")
        if self.pattern is Pattern.EVENTUALLY_DEPENDENT:
            ctx.send_to_merge(f"{ctx.timestep}/{ctx.superstep}".encode())
        halt = ctx.superstep >= self.max_superstep or rng.random() < self.halt_p
        if halt:
            ctx.vote_to_halt()
        self.decisions[key] = (halt, tuple(sent))

    def merge(self, ctx):
        ctx.output(tuple(m.payload for m in ctx.messages))
        ctx.vote_to_halt()


class FnApp(Application):
    """Wraps plain functions as an application."""

    def __init__(self, compute, merge=None, pattern=Pattern.INDEPENDENT, vertex_attrs=(), edge_attrs=()):
        self._compute = compute
        self._merge = merge
        self.pattern = pattern
        self.vertex_attrs = vertex_attrs
        self.edge_attrs = edge_attrs

    def compute(self, ctx):
        self._compute(ctx)

    def merge(self, ctx):
        if self._merge is None:
            raise NotImplementedError
        self._merge(ctx)

    def has_merge(self):
        return self._merge is not None


def check_trace(app, stats, subgraph_ids):
    """Bulk synchrony and halt/wake checks over a recorded engine trace."""
    by_bsp = {}
    for ev in stats.trace:
        by_bsp.setdefault(ev.timestep, {}).setdefault(ev.superstep, []).append(ev)
    for ts, steps in by_bsp.items():
        if ts is None:
            continue
        for ss, events in steps.items():
            for ev in events:
                # halt/wake: a halted subgraph is only re-invoked when it has mail
                assert not (ev.was_halted and not ev.inbox)
                for m in ev.inbox:
                    if ss == 1:
                        assert m.origin.timestep != ts
                    else:
                        assert (m.origin.timestep, m.origin.superstep) == (ts, ss - 1)
            invoked = {ev.subgraph_id for ev in events}
            if ss == 1:
                assert invoked == set(subgraph_ids)
                continue
            prev = [(sg, app.decisions[(ts, ss - 1, sg)]) for sg in subgraph_ids if (ts, ss - 1, sg) in app.decisions]
            for ev in events:
                # exactly the mail sent to it last superstep, by origin id then send order
                expected_mail = [(src, i) for src, (_, sent) in prev for i, t in enumerate(sent, 1) if t == ev.subgraph_id]
                assert [(m.origin.subgraph_id, m.seq) for m in ev.inbox] == expected_mail
            expected = {sg for sg, (halt, _) in prev if not halt}
            expected |= {t for _, (_, sent) in prev for t in sent}
            # anything not invoked at ss - 1 had already halted and stays so unless it receives
            assert invoked == expected, (ts, ss, invoked ^ expected)
        last = max(steps)
        final = [app.decisions[(ts, last, ev.subgraph_id)] for ev in steps[last]]
        assert all(halt and not sent for halt, sent in final)


def sighting_collection(n_vertices, edges, sightings, directed=False, span=100):
    """Collection with ``plate``/``seen_at`` vertex attributes.

    ``sightings[t]`` maps a vertex to a list of ``(plate, timestamp)`` pairs
    observed in instance ``t``.
    """
    tpl = GraphTemplate.build(
        range(n_vertices),
        [(i, s, d) for i, (s, d) in enumerate(edges)],
        directed,
        vertex_schema=[AttributeSchema("plate", ValueType.STRING), AttributeSchema("seen_at", ValueType.INTEGER)],
    )
    insts = []
    for t, seen in enumerate(sightings):
        values = {v: {"plate": [p for p, _ in pairs], "seen_at": [ts for _, ts in pairs]} for v, pairs in seen.items()}
        insts.append(GraphInstance.from_values(tpl, t * span, (t + 1) * span, vertices=values))
    return Collection(tpl, insts)


def vertex_sets(parts):
    return [set(p.vertices.tolist()) for p in parts]


def check_partition_invariants(tpl, parts, n):
    """Disjoint cover, balance, edge accounting and subgraph = union-find component."""
    sets = vertex_sets(parts)
    assert len(parts) == n
    assert set().union(*sets) == set(tpl.vertex_ids.tolist())
    assert sum(len(s) for s in sets) == tpl.n_vertices
    sizes = [len(s) for s in sets]
    assert max(sizes) - min(sizes) <= max(1, math.ceil(tpl.n_vertices * 0.05))

    owner = {v: k for k, s in enumerate(sets) for v in s}
    ends = tpl.edge_endpoints
    for k, p in enumerate(parts):
        for e in p.local_edges.tolist():
            s, d = ends[e]
            assert owner[s] == owner[d] == k
        for e in p.remote_edges.tolist():
            s, d = ends[e]
            assert owner[s] != owner[d] and k in (owner[s], owner[d])
            if tpl.directed:
                assert owner[s] == k
    n_cross = sum(owner[s] != owner[d] for s, d in ends.values())
    total_l = sum(len(p.local_edges) for p in parts)
    total_r = sum(len(p.remote_edges) for p in parts)
    if tpl.directed:
        assert total_l + total_r == tpl.n_edges
    else:
        # an undirected remote edge is stored by both partitions it touches
        assert total_l + total_r - n_cross == tpl.n_edges

    for p in parts:
        uf = UnionFind(p.vertices.tolist())
        for e in p.local_edges.tolist():
            uf.union(*ends[e])
        sgs = find_subgraphs(tpl, p)
        assert [frozenset(sg.vertices.tolist()) for sg in sgs] == uf.groups()
        assert 1 <= len(sgs) <= len(p.vertices)
